#include "cdm/labeled.hpp"

#include <algorithm>
#include <string>

namespace cdm {

LabeledSet::LabeledSet(Matrix f, std::vector<Label> l) : features(std::move(f)), labels(std::move(l)) {
  if (features.rows() != labels.size()) {
    throw InputError("feature rows and labels differ in length");
  }
}

Label LabeledSet::num_classes() const {
  Label m = 0;
  for (Label y : labels) {
    if (y < 1) throw InputError("label " + std::to_string(y) + " is outside 1..M");
    m = std::max(m, y);
  }
  return m;
}

std::vector<std::size_t> LabeledSet::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes()), 0);
  for (Label y : labels) ++counts[static_cast<std::size_t>(y - 1)];
  return counts;
}

Matrix LabeledSet::class_features(Label m) const {
  Matrix out = Matrix::with_cols(dim());
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels[i] == m) out.push_row(features.row(i));
  }
  return out;
}

}  // namespace cdm
