#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "cdm/calibration.hpp"
#include "cdm/classifier.hpp"
#include "cdm/ecdd.hpp"
#include "cdm/errors.hpp"
#include "cdm/random.hpp"

namespace cdm {
namespace {

// Predicts label 1 for x[0] < 0 and label 2 otherwise.
class SignClassifier final : public Classifier {
 public:
  Label predict(std::span<const double> x) const override { return x[0] < 0.0 ? 1 : 2; }
  std::size_t dim() const noexcept override { return 1; }
};

TEST(Ecdd, InitialState) {
  const EcddDetector det(0.2, 0.2, 3.0);
  EXPECT_EQ(det.statistic(), 0.2);
  EXPECT_EQ(det.p_hat(), 0.2);
  EXPECT_EQ(det.samples(), 0u);
  EXPECT_FALSE(det.detected());
}

TEST(Ecdd, SigmaClosedForm) {
  EXPECT_NEAR(ecdd_sigma(0.5, 0.2, 1), 0.1, 1e-15);
  double prev = 0.0;
  const double limit = std::sqrt(0.1 * 0.9 * 0.2 / 1.8);
  for (std::size_t t = 1; t < 200; ++t) {
    const double s = ecdd_sigma(0.1, 0.2, t);
    // Strict growth until the factor 1 - (1 - r)^(2t) rounds to one.
    if (t < 40) {
      EXPECT_GT(s, prev);
    }
    EXPECT_GE(s, prev);
    EXPECT_LE(s, limit);
    prev = s;
  }
  EXPECT_NEAR(prev, limit, 1e-12);
}

TEST(Ecdd, RecursionMatchesDefinition) {
  const double p0 = 0.15, r = 0.2, L = 100.0;
  EcddDetector det(p0, r, L);
  double u = p0, p = p0;
  Rng rng(2);
  for (std::size_t t = 1; t <= 500; ++t) {
    const bool e = rng.bernoulli(0.3);
    det.update(e);
    u = (1.0 - r) * u + r * e;
    p += (e - p) / static_cast<double>(t + 1);
    ASSERT_NEAR(det.statistic(), u, 1e-12);
    ASSERT_NEAR(det.p_hat(), p, 1e-12);
    const double sigma = std::sqrt(p * (1.0 - p) * r / (2.0 - r) * (1.0 - std::pow(1.0 - r, 2.0 * t)));
    ASSERT_NEAR(det.sigma(), sigma, 1e-12);
  }
}

TEST(Ecdd, StatisticIsConvexCombination) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const double p0 = rng.uniform();
    EcddDetector det(p0, 0.2, 1e9);
    bool any_error = false, any_correct = false;
    for (int t = 0; t < 200; ++t) {
      const bool e = rng.bernoulli(0.5);
      any_error |= e;
      any_correct |= !e;
      det.update(e);
      const double lo = std::min(p0, any_correct ? 0.0 : 1.0);
      const double hi = std::max(p0, any_error ? 1.0 : 0.0);
      ASSERT_GE(det.statistic(), lo - 1e-15);
      ASSERT_LE(det.statistic(), hi + 1e-15);
      ASSERT_GE(det.p_hat(), 0.0);
      ASSERT_LE(det.p_hat(), 1.0);
    }
  }
}

TEST(Ecdd, PerfectStreamNeverDetects) {
  EcddDetector det(0.0, 0.2, 0.5);
  for (int t = 0; t < 10000; ++t) {
    EXPECT_FALSE(det.update(false).detected);
    EXPECT_EQ(det.statistic(), 0.0);
  }
}

TEST(Ecdd, InvalidParameters) {
  EXPECT_THROW(EcddDetector(-0.1, 0.2, 3.0), ConfigError);
  EXPECT_THROW(EcddDetector(1.1, 0.2, 3.0), ConfigError);
  EXPECT_THROW(EcddDetector(0.1, 0.0, 3.0), ConfigError);
  EXPECT_THROW(EcddDetector(0.1, 1.0, 3.0), ConfigError);
  EXPECT_THROW(EcddDetector(0.1, 0.2, std::nan("")), ConfigError);
}

struct StepOutcome {
  std::size_t false_alarms = 0;   // detections at t <= tau
  std::size_t window_hits = 0;    // detections in (tau, tau + window]
  std::size_t survivors = 0;      // runs without detection up to tau
  double mean_delay = 0.0;
};

StepOutcome run_step(double p0, double p1, double L, std::size_t tau, std::size_t window, std::size_t reps,
                     std::uint64_t seed) {
  StepOutcome out;
  double delay_sum = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    Rng rng(derive_seed(seed, i));
    EcddDetector det(p0, 0.2, L);
    std::size_t t = 0;
    bool hit = false;
    while (t < tau + window) {
      ++t;
      if (det.update(rng.bernoulli(t <= tau ? p0 : p1)).detected) {
        hit = true;
        break;
      }
    }
    if (hit && t <= tau) {
      ++out.false_alarms;
      continue;
    }
    ++out.survivors;
    if (hit) {
      ++out.window_hits;
      delay_sum += static_cast<double>(t - tau);
    }
  }
  out.mean_delay = out.window_hits ? delay_sum / static_cast<double>(out.window_hits) : 0.0;
  return out;
}

double limit_for(double p0) {
  EcddCalibrationOptions o;
  o.p0 = p0;
  o.replicates = 2000;
  o.seed = 17;
  return calibrate_ecdd_limit(o);
}

TEST(Ecdd, ErrorIncreaseIsDetectedPromptly) {
  const double L = limit_for(0.1);
  const auto out = run_step(0.1, 0.5, L, 160, 1000, 1000, 4);
  EXPECT_EQ(out.window_hits, out.survivors);
  EXPECT_LT(out.mean_delay, 0.1 * 375.0);
}

TEST(Ecdd, ErrorDecreaseIsNotDetected) {
  const double L = limit_for(0.1);
  const auto drift = run_step(0.1, 0.05, L, 160, 375, 4000, 5);
  const auto still = run_step(0.1, 0.1, L, 160, 375, 4000, 6);
  const double p_drift = static_cast<double>(drift.window_hits) / drift.survivors;
  const double p_still = static_cast<double>(still.window_hits) / still.survivors;
  // A drop in error rate only ever lowers the alarm rate relative to a stationary stream.
  EXPECT_LT(p_drift, p_still) << p_drift << " vs " << p_still;
}

TEST(EcddMonitor, ErrorsFromClassifier) {
  auto clf = std::make_shared<const SignClassifier>();
  EcddMonitor mon(clf, EcddDetector(0.0, 0.2, 0.5));
  const std::vector<double> neg{-1.0}, pos{1.0};
  for (int i = 0; i < 100; ++i) EXPECT_FALSE(mon.process(neg, 1).drift);
  // Unlabeled samples advance global time only.
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(mon.process(pos, std::nullopt).drift);
  EXPECT_EQ(mon.detector().samples(), 100u);
  EXPECT_EQ(mon.samples_seen(), 105u);
  Decision d;
  while (!d.drift) d = mon.process(pos, 1);
  EXPECT_FALSE(d.m_star.has_value());
  const auto rep = mon.report();
  EXPECT_EQ(rep.method, "ecdd");
  EXPECT_TRUE(rep.detected);
  EXPECT_EQ(rep.t_star, d.t_star);
  EXPECT_FALSE(rep.m_star.has_value());
}

}  // namespace
}  // namespace cdm
