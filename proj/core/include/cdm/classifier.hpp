#ifndef CDM_CLASSIFIER_HPP_
#define CDM_CLASSIFIER_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cdm/labeled.hpp"

namespace cdm {

enum class ClassifierKind { kKnn, kLda };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::kKnn;
  std::size_t k = 9;  // neighbours, k-NN only
};

ClassifierKind parse_classifier_kind(const std::string& name);
std::string to_string(ClassifierKind kind);

/// Fitted, immutable classifier. Predictions are labels in 1..M.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Label predict(std::span<const double> x) const = 0;
  virtual std::size_t dim() const noexcept = 0;
};

/// Brute-force Euclidean k-NN. Distance ties are broken by training index,
/// vote ties by the smallest label.
class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(LabeledSet training, std::size_t k);
  Label predict(std::span<const double> x) const override;
  std::size_t dim() const noexcept override { return training_.dim(); }
  std::size_t k() const noexcept { return k_; }

 private:
  LabeledSet training_;
  std::size_t k_;
  Label classes_;
};

/// Linear discriminant analysis with a pooled covariance matrix. Stores one
/// linear score w_m . x + b_m per class; the largest score wins, ties go to
/// the smallest label.
class LdaClassifier final : public Classifier {
 public:
  explicit LdaClassifier(const LabeledSet& training);
  Label predict(std::span<const double> x) const override;
  std::size_t dim() const noexcept override { return dim_; }

  /// Regularization added to the pooled covariance diagonal (0 when it was
  /// invertible as is).
  double ridge() const noexcept { return ridge_; }

 private:
  std::size_t dim_ = 0;
  std::vector<Label> classes_;
  std::vector<double> weights_;  // classes_.size() x dim_
  std::vector<double> offsets_;
  double ridge_ = 0.0;
};

/// Fits the classifier. Throws ConfigError when fewer than two classes are
/// present or k exceeds the training size, NumericError when the LDA
/// covariance stays singular after regularization.
std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const LabeledSet& training);

/// Misclassification rate of `spec` estimated by `folds`-fold cross
/// validation over a seeded permutation of the training set.
double cross_validated_error(const ClassifierSpec& spec, const LabeledSet& training,
                             std::size_t folds, std::uint64_t seed);

}  // namespace cdm

#endif  // CDM_CLASSIFIER_HPP_
