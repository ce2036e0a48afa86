#ifndef CDM_QT_EWMA_HPP_
#define CDM_QT_EWMA_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cdm/quanttree.hpp"
#include "cdm/random.hpp"
#include "cdm/threshold_table.hpp"

namespace cdm {

inline constexpr double kDefaultLambda = 0.03;

/// Online QT-EWMA change detector over a QuantTree histogram.
///
/// Keeps one exponentially weighted frequency Z_k per bin, starting from the
/// target probability pi_k, and the Pearson-like divergence
///   T_t = sum_k (Z_{k,t} - pi_k)^2 / pi_k.
/// An alarm is raised the first time T_t exceeds h_t from the threshold
/// table. After an alarm the detector is frozen.
class QtEwmaDetector {
 public:
  struct Step {
    double statistic = 0.0;
    bool detected = false;
  };

  /// `thresholds` may be null, in which case the detector only tracks the
  /// statistic and never raises alarms. Throws ConfigError when lambda is
  /// outside (0, 1) or the table was calibrated for other parameters.
  QtEwmaDetector(std::shared_ptr<const QuantTreeHistogram> hist, double lambda = kDefaultLambda,
                 std::shared_ptr<const ThresholdTable> thresholds = nullptr);

  /// Locates x and folds it in. Throws InputError on non-finite values or a
  /// dimension mismatch. Once detected, further calls leave the state
  /// untouched and report detected = true.
  Step update(std::span<const double> x);

  /// Same as update() for a sample already known to fall in `bin`.
  Step update_bin(std::size_t bin);

  /// Advances the EWMA state by one sample in `bin` and returns T_t without
  /// any threshold comparison. Used by the calibration simulation.
  double observe_bin(std::size_t bin) noexcept;

  /// Threshold decision for the current statistic: true if T_t > h, or with
  /// probability tie_prob if T_t equals h within kTieTolerance. Consumes the
  /// detector's private tie-breaking stream only on ties.
  bool exceeds(double h, double tie_prob) noexcept;

  const QuantTreeHistogram& histogram() const noexcept { return *hist_; }
  std::shared_ptr<const QuantTreeHistogram> histogram_ptr() const noexcept { return hist_; }
  const ThresholdTable* thresholds() const noexcept { return table_.get(); }
  double lambda() const noexcept { return lambda_; }
  std::span<const double> ewma() const noexcept { return z_; }
  std::size_t samples() const noexcept { return t_; }
  double statistic() const noexcept { return statistic_; }
  bool detected() const noexcept { return detection_time_.has_value(); }
  std::optional<std::size_t> detection_time() const noexcept { return detection_time_; }

  /// Threshold applied at the current step (h_t), or +inf without a table
  /// or before the first sample.
  double current_threshold() const noexcept;

  /// Writes one CSV row "t,bin,statistic,threshold,detected" per update to
  /// `out` (header included). Pass nullptr to stop tracing.
  void set_trace(std::ostream* out);

 private:
  std::shared_ptr<const QuantTreeHistogram> hist_;
  std::shared_ptr<const ThresholdTable> table_;
  double lambda_;
  std::vector<double> z_;
  std::size_t t_ = 0;
  double statistic_ = 0.0;
  std::optional<std::size_t> detection_time_;
  Rng tie_rng_;
  std::ostream* trace_ = nullptr;
};

/// Seed of the tie-breaking stream of a detector built on a histogram with
/// the given seed.
constexpr std::uint64_t tie_breaking_seed(std::uint64_t histogram_seed) noexcept {
  return derive_seed(histogram_seed, 0x7469655F62726B31ULL);
}

}  // namespace cdm

#endif  // CDM_QT_EWMA_HPP_
