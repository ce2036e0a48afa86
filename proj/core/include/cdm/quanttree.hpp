#ifndef CDM_QUANTTREE_HPP_
#define CDM_QUANTTREE_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cdm/matrix.hpp"

namespace cdm {

inline constexpr std::size_t kDefaultBins = 16;

/// Side of an axis-aligned split that forms the new bin.
enum class SplitDirection : std::uint8_t {
  kLower,  // x[dim] <= threshold
  kUpper,  // x[dim] >  threshold
};

struct Split {
  std::size_t dim = 0;
  double threshold = 0.0;
  SplitDirection direction = SplitDirection::kLower;

  bool contains(std::span<const double> x) const noexcept {
    return direction == SplitDirection::kLower ? x[dim] <= threshold : x[dim] > threshold;
  }

  friend bool operator==(const Split&, const Split&) = default;
};

/// Uniform target probabilities 1/K.
std::vector<double> uniform_probabilities(std::size_t bins);

/// Histogram over R^d whose bins are carved out of the training set one
/// axis-aligned halfspace at a time. Bin k (k < K-1) is the set of points
/// that satisfy split k and none of the splits before it; bin K-1 holds the
/// remainder. Every bin receives a fixed number of training points, which
/// makes any statistic of bin counts independent of the data distribution.
///
/// Immutable after construction; safe to share between threads.
class QuantTreeHistogram {
 public:
  /// Builds the histogram. Throws ConfigError when N < K or the target
  /// probabilities are not a positive probability vector, InputError on
  /// non-finite training values.
  static QuantTreeHistogram build(const Matrix& training, std::span<const double> target_probs,
                                  std::uint64_t seed);

  /// Assembles a histogram from its parts (deserialization). Validates the
  /// structural invariants.
  QuantTreeHistogram(std::size_t dim, std::size_t train_size, std::uint64_t seed,
                     std::vector<double> target_probs, std::vector<Split> splits);

  std::size_t bins() const noexcept { return probs_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t train_size() const noexcept { return train_size_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<double>& target_probs() const noexcept { return probs_; }
  const std::vector<Split>& splits() const noexcept { return splits_; }

  /// Training points assigned to each bin by the construction rule.
  std::vector<std::size_t> allocation() const;

  /// Bin index of x, O(K). Throws InputError on dimension mismatch or
  /// non-finite coordinates.
  std::size_t locate_bin(std::span<const double> x) const;

  /// Same as locate_bin without validation; x must have dim() finite entries.
  std::size_t locate_bin_unchecked(std::span<const double> x) const noexcept {
    for (std::size_t k = 0; k < splits_.size(); ++k) {
      if (splits_[k].contains(x)) return k;
    }
    return splits_.size();
  }

  /// Histogram of `data` over the bins. Rows must have dim() columns.
  std::vector<std::size_t> bin_counts(const Matrix& data) const;

  /// Text record; doubles are written as hexadecimal floats so that
  /// write -> read reproduces the histogram bit for bit.
  void write(std::ostream& out) const;
  static QuantTreeHistogram read(std::istream& in);

  friend bool operator==(const QuantTreeHistogram&, const QuantTreeHistogram&) = default;

 private:
  QuantTreeHistogram() = default;

  std::size_t dim_ = 0;
  std::size_t train_size_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> probs_;
  std::vector<Split> splits_;
};

/// Deterministic allocation of `total` points over `probs`:
/// L_k = round(remaining * pi_k / sum_{j>=k} pi_j), clamped so that every bin
/// keeps at least one point. The last bin takes the remainder.
std::vector<std::size_t> allocate_counts(std::size_t total, std::span<const double> probs);

/// Throws ConfigError unless probs is non-empty, positive and sums to 1.
void validate_probabilities(std::span<const double> probs);

}  // namespace cdm

#endif  // CDM_QUANTTREE_HPP_
