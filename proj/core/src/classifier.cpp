#include "cdm/classifier.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "cdm/errors.hpp"
#include "cdm/random.hpp"

namespace cdm {

namespace {

std::size_t distinct_classes(const LabeledSet& training) {
  auto counts = training.class_counts();
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

void check_input(std::span<const double> x, std::size_t dim) {
  if (x.size() != dim) throw InputError("sample dimension does not match the classifier");
}

}  // namespace

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "knn") return ClassifierKind::kKnn;
  if (name == "lda") return ClassifierKind::kLda;
  throw ConfigError("unknown classifier '" + name + "' (expected knn or lda)");
}

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::kKnn ? "knn" : "lda"; }

KnnClassifier::KnnClassifier(LabeledSet training, std::size_t k)
    : training_(std::move(training)), k_(k) {
  if (k_ == 0) throw ConfigError("k-NN needs k >= 1");
  if (k_ > training_.size()) {
    throw ConfigError("k = " + std::to_string(k_) + " exceeds the training size " +
                      std::to_string(training_.size()));
  }
  if (distinct_classes(training_) < 2) throw ConfigError("classifier training needs at least 2 classes");
  classes_ = training_.num_classes();
}

Label KnnClassifier::predict(std::span<const double> x) const {
  check_input(x, dim());
  const std::size_t n = training_.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = training_.features.row(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double diff = row[j] - x[j];
      d2 += diff * diff;
    }
    dist[i] = {d2, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  std::vector<std::size_t> votes(static_cast<std::size_t>(classes_) + 1, 0);
  for (std::size_t i = 0; i < k_; ++i) ++votes[static_cast<std::size_t>(training_.labels[dist[i].second])];
  // max_element returns the first maximum, i.e. the smallest label.
  return static_cast<Label>(std::max_element(votes.begin() + 1, votes.end()) - votes.begin());
}

LdaClassifier::LdaClassifier(const LabeledSet& training) : dim_(training.dim()) {
  if (distinct_classes(training) < 2) throw ConfigError("classifier training needs at least 2 classes");
  const std::size_t d = dim_;
  const auto counts = training.class_counts();
  const std::size_t n = training.size();

  std::vector<Eigen::VectorXd> means;
  for (std::size_t m = 0; m < counts.size(); ++m) {
    if (counts[m] == 0) continue;
    classes_.push_back(static_cast<Label>(m + 1));
    means.emplace_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
  }
  std::vector<std::size_t> slot(counts.size(), 0);
  for (std::size_t c = 0; c < classes_.size(); ++c) slot[static_cast<std::size_t>(classes_[c] - 1)] = c;

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = training.features.row(i);
    means[slot[static_cast<std::size_t>(training.labels[i] - 1)]] +=
        Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(d));
  }
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    means[c] /= static_cast<double>(counts[static_cast<std::size_t>(classes_[c] - 1)]);
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = training.features.row(i);
    const Eigen::VectorXd diff =
        Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(d)) -
        means[slot[static_cast<std::size_t>(training.labels[i] - 1)]];
    cov.noalias() += diff * diff.transpose();
  }
  const double dof = static_cast<double>(n > classes_.size() ? n - classes_.size() : 1);
  cov /= dof;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff());
  if (singular) {
    const double trace = cov.trace();
    ridge_ = 1e-6 * (trace > 0.0 ? trace : 1.0) / static_cast<double>(d);
    cov.diagonal().array() += ridge_;
    ldlt.compute(cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
      throw NumericError("pooled covariance is singular even after regularization");
    }
  }

  weights_.resize(classes_.size() * d);
  offsets_.resize(classes_.size());
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    const Eigen::VectorXd w = ldlt.solve(means[c]);
    std::copy(w.data(), w.data() + d, weights_.begin() + static_cast<std::ptrdiff_t>(c * d));
    const double prior = static_cast<double>(counts[static_cast<std::size_t>(classes_[c] - 1)]) /
                         static_cast<double>(n);
    offsets_[c] = -0.5 * w.dot(means[c]) + std::log(prior);
  }
}

Label LdaClassifier::predict(std::span<const double> x) const {
  check_input(x, dim_);
  Label best = classes_.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    double score = offsets_[c];
    const double* w = weights_.data() + c * dim_;
    for (std::size_t j = 0; j < dim_; ++j) score += w[j] * x[j];
    if (score > best_score) {
      best_score = score;
      best = classes_[c];
    }
  }
  return best;
}

std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const LabeledSet& training) {
  if (spec.kind == ClassifierKind::kKnn) return std::make_unique<KnnClassifier>(training, spec.k);
  return std::make_unique<LdaClassifier>(training);
}

double cross_validated_error(const ClassifierSpec& spec, const LabeledSet& training,
                             std::size_t folds, std::uint64_t seed) {
  const std::size_t n = training.size();
  if (folds < 2 || folds > n) throw ConfigError("cross validation needs 2 <= folds <= training size");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::size_t errors = 0;
  std::vector<bool> held_out(n);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n / folds;
    const std::size_t end = (f + 1) * n / folds;
    std::fill(held_out.begin(), held_out.end(), false);
    for (std::size_t p = begin; p < end; ++p) held_out[perm[p]] = true;
    LabeledSet fit_part(training.dim());
    fit_part.features.reserve_rows(n - (end - begin));
    for (std::size_t i = 0; i < n; ++i) {
      if (!held_out[i]) fit_part.add(training.features.row(i), training.labels[i]);
    }
    const auto model = fit_classifier(spec, fit_part);
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t i = perm[p];
      if (model->predict(training.features.row(i)) != training.labels[i]) ++errors;
    }
  }
  return static_cast<double>(errors) / static_cast<double>(n);
}

}  // namespace cdm
