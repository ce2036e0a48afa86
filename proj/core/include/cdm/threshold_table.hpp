#ifndef CDM_THRESHOLD_TABLE_HPP_
#define CDM_THRESHOLD_TABLE_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cdm {

/// Relative distance under which a statistic is considered to sit exactly on
/// a threshold. Early QT-EWMA statistics take only a handful of values, so
/// the threshold often coincides with an atom of the null distribution.
inline constexpr double kTieTolerance = 1e-9;

/// Simulation parameters that produced a table. Tables are keyed by
/// (bins, lambda, arl0, train_size) only: the statistic's null distribution
/// does not depend on the data distribution or its dimension.
struct ThresholdTableInfo {
  std::size_t bins = 0;
  double lambda = 0.0;
  double arl0 = 0.0;
  std::size_t train_size = 0;
  std::size_t t_max = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t survivor_floor = 0;

  double alpha() const noexcept { return 1.0 / arl0; }

  friend bool operator==(const ThresholdTableInfo&, const ThresholdTableInfo&) = default;
};

/// Time-varying QT-EWMA thresholds h_1..h_{t_max}. A statistic strictly
/// above h_t raises an alarm; a statistic tied with h_t raises it with
/// probability tie_probability(t), which makes the conditional false alarm
/// probability exactly alpha even where the statistic is discrete. Beyond
/// t_max both values stay at their t_max entries.
class ThresholdTable {
 public:
  ThresholdTable(ThresholdTableInfo info, std::vector<double> thresholds,
                 std::vector<double> tie_probabilities);

  const ThresholdTableInfo& info() const noexcept { return info_; }
  std::size_t t_max() const noexcept { return thresholds_.size(); }

  /// h_t for t >= 1.
  double threshold(std::size_t t) const noexcept {
    return thresholds_[std::min(t, thresholds_.size()) - 1];
  }
  double tie_probability(std::size_t t) const noexcept {
    return tie_probs_[std::min(t, tie_probs_.size()) - 1];
  }

  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const std::vector<double>& tie_probabilities() const noexcept { return tie_probs_; }

  /// Throws ConfigError naming the first field that differs from what the
  /// consumer was configured with.
  void check_compatible(std::size_t bins, double lambda, std::size_t train_size) const;

  void write(std::ostream& out) const;
  static ThresholdTable read(std::istream& in);

  /// Throws IoError when the file cannot be written.
  void save(const std::filesystem::path& path) const;
  /// Throws IoError when the file cannot be opened, ParseError when its
  /// content is not a valid table (including a version mismatch).
  static ThresholdTable load(const std::filesystem::path& path);

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;

 private:
  ThresholdTableInfo info_;
  std::vector<double> thresholds_;
  std::vector<double> tie_probs_;
};

}  // namespace cdm

#endif  // CDM_THRESHOLD_TABLE_HPP_
