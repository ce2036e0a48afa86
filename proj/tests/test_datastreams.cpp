#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "cdm/datastreams.hpp"
#include "cdm/errors.hpp"

namespace cdm {
namespace {

Matrix cov2(double a, double b, double c) {
  Matrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = m(1, 0) = b;
  m(1, 1) = c;
  return m;
}

TEST(Mixture, LabelFrequenciesFollowPriors) {
  auto cfg = gaussian_mixture({{0.0}, {1.0}, {2.0}});
  cfg.priors = {0.6, 0.3, 0.1};
  const GaussianMixtureSampler s(cfg);
  Rng rng(1);
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[s.draw_label(rng) - 1];
  for (int m = 0; m < 3; ++m) {
    const double p = cfg.priors[m];
    EXPECT_NEAR(counts[m] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Mixture, SampleMomentsMatchCovariance) {
  GaussianMixtureConfig cfg;
  cfg.pre = {{{1.0, -2.0}, cov2(2.0, 0.6, 0.5)}};
  cfg.post = cfg.pre;
  cfg.priors = {1.0};
  const GaussianMixtureSampler s(cfg);
  Rng rng(2);
  const int n = 200000;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::vector<double> x(2);
  for (int i = 0; i < n; ++i) {
    s.draw(1, false, rng, x);
    sx += x[0];
    sy += x[1];
    sxx += x[0] * x[0];
    sxy += x[0] * x[1];
    syy += x[1] * x[1];
  }
  const double mx = sx / n, my = sy / n;
  EXPECT_NEAR(mx, 1.0, 0.02);
  EXPECT_NEAR(my, -2.0, 0.01);
  EXPECT_NEAR(sxx / n - mx * mx, 2.0, 0.03);
  EXPECT_NEAR(sxy / n - mx * my, 0.6, 0.02);
  EXPECT_NEAR(syy / n - my * my, 0.5, 0.01);
}

TEST(Mixture, ValidationErrors) {
  auto cfg = two_class_gaussian(2.0);
  cfg.priors = {0.5, 0.6};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_class_gaussian(2.0);
  cfg.pre[1].mean = {1.0, 2.0, 3.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_class_gaussian(2.0);
  cfg.pre[0].covariance = cov2(1.0, 2.0, 1.0);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = two_class_gaussian(2.0);
  cfg.pre[0].covariance = cov2(1.0, 0.2, 1.0);
  cfg.pre[0].covariance(0, 1) = 0.3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(two_class_gaussian(2.0).validate());
}

TEST(Mixture, GenerateStreamSwitchesAtTau) {
  auto cfg = two_class_gaussian(2.0);
  cfg.post[1].mean = {2.0, 50.0};
  cfg.tau = 300;
  const auto s = generate_stream(cfg, 1000, 3);
  ASSERT_EQ(s.size(), 1000u);
  EXPECT_EQ(s.tau, std::optional<std::size_t>(300));
  EXPECT_EQ(s.seed, std::optional<std::uint64_t>(3));
  for (std::size_t t = 0; t < s.size(); ++t) {
    ASSERT_TRUE(s.labels[t].has_value());
    const bool far = s.features(t, 1) > 25.0;
    // Sample t + 1 is post-change when t + 1 > tau.
    EXPECT_EQ(far, t >= 300 && *s.labels[t] == 2) << t;
  }
  cfg.tau = 1001;
  EXPECT_THROW(generate_stream(cfg, 1000, 3), ConfigError);
}

TEST(Mixture, StreamsAreReproducible) {
  const auto cfg = two_class_gaussian(2.0);
  const auto a = generate_stream(cfg, 500, 9);
  const auto b = generate_stream(cfg, 500, 9);
  const auto c = generate_stream(cfg, 500, 10);
  EXPECT_EQ(a.features.data(), b.features.data());
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.features.data(), c.features.data());
  // The lazy source produces the same samples.
  GaussianStreamSource lazy(std::make_shared<const GaussianMixtureSampler>(cfg), 500, 9);
  Sample smp;
  for (std::size_t t = 0; t < 500; ++t) {
    ASSERT_TRUE(lazy.next(smp));
    EXPECT_EQ(smp.x[0], a.features(t, 0));
    EXPECT_EQ(smp.label, a.labels[t]);
  }
  EXPECT_FALSE(lazy.next(smp));
}

TEST(Skl, ClosedFormForEqualCovariances) {
  const std::vector<double> m0{0.0, 0.0}, m1{1.0, 2.0};
  EXPECT_NEAR(skl_gaussian(m0, Matrix(), m1, Matrix()), 0.5 * 5.0, 1e-12);
  // Mahalanobis form: 0.5 * d' S^-1 d.
  const Matrix s = cov2(2.0, 0.0, 0.5);
  EXPECT_NEAR(skl_gaussian(m0, s, m1, s), 0.5 * (1.0 / 2.0 + 4.0 / 0.5), 1e-12);
  EXPECT_EQ(skl_gaussian(m1, s, m1, s), 0.0);
}

TEST(Skl, ScaleOnlyClosedForm) {
  // 1-D, equal means: KL(s0 || s1) = 0.5 (s0/s1 - 1 - log(s0/s1)).
  Matrix a(1, 1, 1.0), b(1, 1, 4.0);
  const std::vector<double> m{0.0};
  const double k01 = 0.5 * (0.25 - 1.0 - std::log(0.25));
  const double k10 = 0.5 * (4.0 - 1.0 - std::log(4.0));
  EXPECT_NEAR(skl_gaussian(m, a, m, b), 0.5 * (k01 + k10), 1e-12);
}

TEST(Skl, SymmetricAndRotationInvariant) {
  const std::vector<double> m0{0.3, -1.0}, m1{1.2, 0.7};
  const Matrix c0 = cov2(1.5, 0.4, 0.8), c1 = cov2(0.6, -0.1, 1.1);
  const double v = skl_gaussian(m0, c0, m1, c1);
  EXPECT_NEAR(v, skl_gaussian(m1, c1, m0, c0), 1e-12);
  const double th = 0.7, c = std::cos(th), s = std::sin(th);
  auto rot = [&](const std::vector<double>& m) { return std::vector<double>{c * m[0] - s * m[1], s * m[0] + c * m[1]}; };
  auto rotc = [&](const Matrix& a) {
    // R A R'
    const double r[2][2] = {{c, -s}, {s, c}};
    Matrix out(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l) acc += r[i][k] * a(k, l) * r[j][l];
        out(i, j) = acc;
      }
    return out;
  };
  EXPECT_NEAR(skl_gaussian(rot(m0), rotc(c0), rot(m1), rotc(c1)), v, 1e-10);
  EXPECT_THROW(skl_gaussian(m0, cov2(1.0, 2.0, 1.0), m1, c1), NumericError);
}

LabeledStream counting_stream(std::size_t n, double offset) {
  LabeledStream s(1);
  for (std::size_t i = 0; i < n; ++i) s.add(std::vector<double>{offset + i}, Label(1 + i % 2));
  return s;
}

TEST(Splice, KeepsPrefixThenPost) {
  const auto pre = counting_stream(100, 0.0);
  const auto post = counting_stream(50, 1000.0);
  const auto s = splice_streams(pre, post, 30);
  ASSERT_EQ(s.size(), 80u);
  EXPECT_EQ(s.tau, std::optional<std::size_t>(30));
  EXPECT_EQ(s.features(29, 0), 29.0);
  EXPECT_EQ(s.features(30, 0), 1000.0);
  EXPECT_EQ(s.features(79, 0), 1049.0);
  EXPECT_THROW(splice_streams(pre, post, 101), InputError);
  LabeledStream wide(2);
  wide.add(std::vector<double>{0.0, 0.0}, 1);
  EXPECT_THROW(splice_streams(pre, wide, 10), InputError);
}

TEST(Subsample, DisjointAndComplete) {
  LabeledSet data(1);
  for (int i = 0; i < 90; ++i) data.add(std::vector<double>{double(i)}, Label(1 + i % 3));
  const std::vector<std::size_t> counts{10, 5, 30};
  const auto [drawn, rest] = subsample_without_replacement(data, counts, 4);
  EXPECT_EQ(drawn.class_counts(), (std::vector<std::size_t>{10, 5, 30}));
  EXPECT_EQ(rest.size(), 45u);
  std::multiset<double> all;
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    all.insert(drawn.features(i, 0));
    EXPECT_EQ(drawn.labels[i], Label(1 + int(drawn.features(i, 0)) % 3));
  }
  for (std::size_t i = 0; i < rest.size(); ++i) all.insert(rest.features(i, 0));
  ASSERT_EQ(all.size(), 90u);
  EXPECT_EQ(std::set<double>(all.begin(), all.end()).size(), 90u);
  // Remaining rows keep their original order.
  for (std::size_t i = 1; i < rest.size(); ++i) EXPECT_LT(rest.features(i - 1, 0), rest.features(i, 0));
  const std::vector<std::size_t> too_many{10, 31, 0};
  try {
    subsample_without_replacement(data, too_many, 4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace cdm
