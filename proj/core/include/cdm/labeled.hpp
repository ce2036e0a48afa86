#ifndef CDM_LABELED_HPP_
#define CDM_LABELED_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cdm/matrix.hpp"

namespace cdm {

/// Class labels are 1..M. Label 0 marks a label that is present but not part
/// of the known label universe (see LabelPolicy).
using Label = int;
inline constexpr Label kUnknownLabel = 0;

/// One stream element. `label` is empty for unlabeled samples.
struct Sample {
  std::vector<double> x;
  std::optional<Label> label;
};

/// Labeled training data.
struct LabeledSet {
  Matrix features;
  std::vector<Label> labels;

  LabeledSet() = default;
  explicit LabeledSet(std::size_t dim) : features(Matrix::with_cols(dim)) {}
  LabeledSet(Matrix f, std::vector<Label> l);

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  void add(std::span<const double> x, Label y) {
    features.push_row(x);
    labels.push_back(y);
  }

  /// Largest label present (M).
  Label num_classes() const;
  /// Per-class counts, index m-1 for class m, sized num_classes().
  std::vector<std::size_t> class_counts() const;
  /// Rows of class m.
  Matrix class_features(Label m) const;
};

}  // namespace cdm

#endif  // CDM_LABELED_HPP_
