#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cdm/classifier.hpp"
#include "cdm/errors.hpp"
#include "test_support.hpp"

namespace cdm {
namespace {

using testing::phi;

// Two identity-covariance Gaussian classes delta apart along the first axis.
LabeledSet two_gaussians(std::size_t per_class, double delta, std::uint64_t seed, std::size_t d = 2) {
  Rng rng(seed);
  LabeledSet set(d);
  std::vector<double> x(d);
  for (Label y : {1, 2}) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (auto& v : x) v = rng.normal();
      if (y == 2) x[0] += delta;
      set.add(x, y);
    }
  }
  return set;
}

double error_rate(const Classifier& c, const LabeledSet& test) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < test.size(); ++i) wrong += c.predict(test.features.row(i)) != test.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

TEST(Lda, WellSeparatedClasses) {
  const LdaClassifier lda(two_gaussians(256, 4.0, 1));
  const double err = error_rate(lda, two_gaussians(20000, 4.0, 2));
  EXPECT_LT(err, 0.05);
  EXPECT_NEAR(err, phi(-2.0), 0.01);
  EXPECT_EQ(lda.ridge(), 0.0);
}

TEST(Lda, OverlapMatchesGaussianOracle) {
  const LdaClassifier lda(two_gaussians(2000, 2.0, 3));
  EXPECT_NEAR(error_rate(lda, two_gaussians(50000, 2.0, 4)), phi(-1.0), 0.01);
}

// 1-D LDA boundary: midpoint of the class means shifted by
// s^2 log(n1 / n2) / (m2 - m1), with s^2 the pooled variance.
TEST(Lda, OneDimensionalBoundaryWithUnequalPriors) {
  Rng rng(5);
  LabeledSet set(1);
  std::vector<double> a, b;
  for (int i = 0; i < 300; ++i) {
    a.push_back(rng.normal());
    set.add(std::vector<double>{a.back()}, 1);
  }
  for (int i = 0; i < 100; ++i) {
    b.push_back(rng.normal() + 1.5);
    set.add(std::vector<double>{b.back()}, 2);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };
  const double m1 = mean(a), m2 = mean(b);
  double ss = 0.0;
  for (double x : a) ss += (x - m1) * (x - m1);
  for (double x : b) ss += (x - m2) * (x - m2);
  const double s2 = ss / (400.0 - 2.0);
  const double boundary = 0.5 * (m1 + m2) + s2 * std::log(300.0 / 100.0) / (m2 - m1);
  const LdaClassifier lda(set);
  EXPECT_EQ(lda.predict(std::vector<double>{boundary - 1e-6}), 1);
  EXPECT_EQ(lda.predict(std::vector<double>{boundary + 1e-6}), 2);
}

TEST(Lda, InvariantToAffineWhitening) {
  const auto train = two_gaussians(300, 1.5, 6, 3);
  const auto test = two_gaussians(2000, 1.5, 7, 3);
  const double A[3][3] = {{2.0, 0.5, 0.0}, {-0.3, 1.0, 0.7}, {0.1, 0.0, 0.4}};
  const double shift[3] = {5.0, -2.0, 0.25};
  auto transform = [&](const LabeledSet& s) {
    LabeledSet out(3);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto x = s.features.row(i);
      std::vector<double> y(3, 0.0);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) y[r] += A[r][c] * x[c];
        y[r] += shift[r];
      }
      out.add(y, s.labels[i]);
    }
    return out;
  };
  const LdaClassifier plain(train);
  const LdaClassifier mapped(transform(train));
  const auto test_mapped = transform(test);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    agree += plain.predict(test.features.row(i)) == mapped.predict(test_mapped.features.row(i));
  // Only points within rounding distance of the boundary may flip.
  EXPECT_GE(agree, test.size() - 1);
}

TEST(Lda, SingularCovarianceIsRegularized) {
  auto set = two_gaussians(100, 2.0, 8, 2);
  for (std::size_t i = 0; i < set.size(); ++i) set.features(i, 1) = 2.0 * set.features(i, 0);
  const LdaClassifier lda(set);
  EXPECT_GT(lda.ridge(), 0.0);
  EXPECT_EQ(lda.predict(std::vector<double>{-1.0, -2.0}), 1);
  EXPECT_EQ(lda.predict(std::vector<double>{3.0, 6.0}), 2);
}

TEST(Knn, OneNeighbourRecoversTrainingLabels) {
  const auto train = two_gaussians(200, 0.5, 9);
  const KnnClassifier knn(train, 1);
  for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(knn.predict(train.features.row(i)), train.labels[i]);
}

TEST(Knn, TieRules) {
  LabeledSet set(1);
  set.add(std::vector<double>{-1.0}, 2);
  set.add(std::vector<double>{1.0}, 1);
  set.add(std::vector<double>{5.0}, 1);
  // Equidistant points: the lower training index wins.
  EXPECT_EQ(KnnClassifier(set, 1).predict(std::vector<double>{0.0}), 2);
  // One vote each: the smaller label wins.
  EXPECT_EQ(KnnClassifier(set, 2).predict(std::vector<double>{0.0}), 1);
}

TEST(Knn, MajorityOfNine) {
  const auto train = two_gaussians(256, 2.0, 10);
  const KnnClassifier knn(train, 9);
  const double err = error_rate(knn, two_gaussians(5000, 2.0, 11));
  // k-NN is close to, but not better than, the Bayes error.
  EXPECT_GT(err, phi(-1.0) - 0.015);
  EXPECT_LT(err, phi(-1.0) + 0.04);
}

TEST(Classifier, FitErrors) {
  LabeledSet one(2);
  for (int i = 0; i < 20; ++i) one.add(std::vector<double>{1.0 * i, 0.0}, 1);
  EXPECT_THROW(fit_classifier({ClassifierKind::kLda, 9}, one), ConfigError);
  EXPECT_THROW(fit_classifier({ClassifierKind::kKnn, 9}, one), ConfigError);
  const auto two = two_gaussians(3, 1.0, 1);
  EXPECT_THROW(fit_classifier({ClassifierKind::kKnn, 7}, two), ConfigError);
  EXPECT_THROW(parse_classifier_kind("svm"), ConfigError);
  EXPECT_EQ(parse_classifier_kind("knn"), ClassifierKind::kKnn);
  EXPECT_EQ(parse_classifier_kind("lda"), ClassifierKind::kLda);
}

TEST(Classifier, CrossValidatedErrorIsDeterministicAndSane) {
  const auto train = two_gaussians(256, 2.0, 12);
  const double a = cross_validated_error({ClassifierKind::kLda, 9}, train, 5, 3);
  EXPECT_EQ(a, cross_validated_error({ClassifierKind::kLda, 9}, train, 5, 3));
  EXPECT_NEAR(a, phi(-1.0), 0.05);
  // Training error of 1-NN is zero; its cross-validated error is not.
  EXPECT_GT(cross_validated_error({ClassifierKind::kKnn, 1}, train, 5, 3), 0.1);
  EXPECT_THROW(cross_validated_error({ClassifierKind::kLda, 9}, train, 1, 3), ConfigError);
}

}  // namespace
}  // namespace cdm
