#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cdm/calibration.hpp"
#include "cdm/ecdd.hpp"
#include "cdm/errors.hpp"
#include "cdm/parallel.hpp"
#include "test_support.hpp"

namespace cdm {
namespace {

CalibrationOptions small_options() {
  CalibrationOptions o;
  o.replicates = 10000;
  o.t_max = 170;
  o.seed = 5;
  return o;
}

const ThresholdTable& small_table() {
  static const ThresholdTable table = calibrate_thresholds(small_options());
  return table;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Trajectory, FirstValueAndDeterminism) {
  const auto a = simulate_stationary_trajectory(256, 16, 0.03, 300, 9);
  const auto b = simulate_stationary_trajectory(256, 16, 0.03, 300, 9);
  ASSERT_EQ(a.size(), 300u);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a[0], 0.0135, 1e-12);
  EXPECT_NE(a, simulate_stationary_trajectory(256, 16, 0.03, 300, 10));
}

// Steady-state mean of T: sum_k E[(Z_k - pi_k)^2] / pi_k with Var(Z_k) =
// lambda / (2 - lambda) p_k (1 - p_k) and bin masses p_k that scatter around
// pi_k with variance ~ pi_k (1 - pi_k) / (N + 2).
TEST(Trajectory, MeanStatisticStabilizesNearSteadyState) {
  const double lambda = 0.03;
  const std::size_t K = 16, N = 256, reps = 10000;
  std::vector<double> sum(600, 0.0);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto traj = simulate_stationary_trajectory(N, K, lambda, 600, derive_seed(77, i));
    for (std::size_t t = 0; t < 600; ++t) sum[t] += traj[t];
  }
  const double pi = 1.0 / K;
  const double spread = pi * (1.0 - pi) / (N + 2.0);
  const double expected =
      K * (lambda / (2.0 - lambda) * (pi * (1.0 - pi) - spread) + spread) / pi;
  const double late = sum[599] / reps;
  const double mid = sum[299] / reps;
  const double early = sum[4] / reps;
  EXPECT_GT(late, 0.0);
  EXPECT_LT(early, 0.5 * late);
  EXPECT_NEAR(late / expected, 1.0, 0.04);
  EXPECT_NEAR(mid / late, 1.0, 0.04);
}

TEST(Calibration, Deterministic) {
  const ThresholdTable again = calibrate_thresholds(small_options());
  EXPECT_EQ(again, small_table());
}

TEST(Calibration, IndependentOfThreadCount) {
  const std::size_t before = thread_count();
  set_thread_count(3);
  const ThresholdTable threaded = calibrate_thresholds(small_options());
  set_thread_count(before);
  EXPECT_EQ(threaded, small_table());
}

TEST(Calibration, TableShape) {
  const auto& t = small_table();
  ASSERT_EQ(t.t_max(), 170u);
  EXPECT_NEAR(t.threshold(1), 0.0135, 1e-12);
  for (std::size_t s = 1; s <= t.t_max(); ++s) {
    EXPECT_GT(t.threshold(s), 0.0);
    EXPECT_GE(t.tie_probability(s), 0.0);
    EXPECT_LE(t.tie_probability(s), 1.0);
  }
  // Tail rule.
  EXPECT_EQ(t.threshold(1000), t.threshold(170));
  EXPECT_EQ(t.info().alpha(), 1.0 / 375.0);
}

// The same seed replays the calibration trajectories, so every step removes
// alpha * n survivors up to the randomized tie decision.
TEST(Calibration, PeelRemovesAlphaPerStep) {
  const auto& table = small_table();
  const auto replay = replay_exceedance(table, 10000, 170, 5);
  const double alpha = table.info().alpha();
  for (std::size_t t = 0; t < 170; ++t) {
    const double n = static_cast<double>(replay.survivors[t]);
    const double sd = std::sqrt(n * alpha * (1.0 - alpha));
    EXPECT_NEAR(static_cast<double>(replay.exceedances[t]), alpha * n, 3.0 * sd) << "t = " << t + 1;
  }
}

TEST(Calibration, SurvivorsThinGeometrically) {
  const auto& table = small_table();
  const auto replay = replay_exceedance(table, 10000, 170, 5);
  const double alpha = table.info().alpha();
  const double p = std::pow(1.0 - alpha, 170.0);
  const double survivors = static_cast<double>(replay.survivors.back() - replay.exceedances.back());
  EXPECT_NEAR(survivors, 10000.0 * p, 3.0 * std::sqrt(10000.0 * p * (1.0 - p)));
}

TEST(Calibration, ValidatesOptions) {
  auto o = small_options();
  o.replicates = 9999;
  EXPECT_THROW(calibrate_thresholds(o), ConfigError);
  o = small_options();
  o.t_max = 160;  // < 5 / lambda
  EXPECT_THROW(calibrate_thresholds(o), ConfigError);
  o = small_options();
  o.arl0 = 1.5;
  EXPECT_THROW(calibrate_thresholds(o), ConfigError);
  o = small_options();
  o.train_size = 8;
  EXPECT_THROW(calibrate_thresholds(o), ConfigError);
}

TEST(Calibration, SurvivorStarvationIsReported) {
  auto o = small_options();
  o.arl0 = 2.0;  // half the survivors leave at every step
  try {
    calibrate_thresholds(o);
    FAIL() << "expected CalibrationError";
  } catch (const CalibrationError& e) {
    EXPECT_NE(std::string(e.what()).find("replicates"), std::string::npos);
  }
}

TEST(ThresholdTableFile, SaveLoadSaveIsByteIdentical) {
  testing::TempDir dir("table");
  small_table().save(dir / "a.txt");
  const ThresholdTable loaded = ThresholdTable::load(dir / "a.txt");
  EXPECT_EQ(loaded, small_table());
  loaded.save(dir / "b.txt");
  EXPECT_EQ(read_file(dir / "a.txt"), read_file(dir / "b.txt"));
}

TEST(ThresholdTableFile, MissingFileIsAnIoError) {
  testing::TempDir dir("table");
  EXPECT_THROW(ThresholdTable::load(dir / "nope.txt"), IoError);
  EXPECT_THROW(small_table().save(dir / "no" / "such" / "dir.txt"), IoError);
}

TEST(ThresholdTableFile, CorruptFilesAreParseErrors) {
  testing::TempDir dir("table");
  std::ostringstream good;
  small_table().write(good);
  const std::string text = good.str();
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name, std::ios::binary) << body;
    return dir / name;
  };
  EXPECT_THROW(ThresholdTable::load(write("empty.txt", "")), ParseError);
  EXPECT_THROW(ThresholdTable::load(write("half.txt", text.substr(0, text.size() / 2))), ParseError);
  std::string version = text;
  version.replace(0, version.find('\n'), "cdm-thresholds 2");
  EXPECT_THROW(ThresholdTable::load(write("version.txt", version)), ParseError);
  std::string garbage = text;
  garbage.replace(garbage.find("\nh 3 ") + 5, 3, "zzz");
  EXPECT_THROW(ThresholdTable::load(write("garbage.txt", garbage)), ParseError);
}

TEST(ThresholdTableFile, RejectsInvalidValues) {
  ThresholdTableInfo info{16, 0.03, 375.0, 256, 2, 10000, 0, 1000};
  EXPECT_THROW(ThresholdTable(info, {0.1, -0.2}, {0.0, 0.0}), ConfigError);
  EXPECT_THROW(ThresholdTable(info, {0.1}, {0.0, 0.0}), ConfigError);
  EXPECT_THROW(ThresholdTable(info, {0.1, 0.2}, {0.0, 1.5}), ConfigError);
}

TEST(EcddLimit, SigmaAtFirstStep) {
  EXPECT_NEAR(ecdd_sigma(0.5, 0.2, 1), 0.1, 1e-15);
}

TEST(EcddLimit, MonotoneInTarget) {
  EcddCalibrationOptions o;
  o.p0 = 0.1;
  o.replicates = 2000;
  o.seed = 3;
  double prev = 0.0;
  for (double arl0 : {100.0, 375.0, 1000.0}) {
    o.arl0 = arl0;
    const double L = calibrate_ecdd_limit(o);
    EXPECT_GT(L, prev) << "arl0 " << arl0;
    prev = L;
  }
}

TEST(EcddLimit, ReproducesTargetOnFreshStreams) {
  EcddCalibrationOptions o;
  o.p0 = 0.2;
  o.arl0 = 375.0;
  o.replicates = 10000;
  o.seed = 4;
  const double L = calibrate_ecdd_limit(o);
  const double arl = simulate_ecdd_run_length(0.2, 0.2, L, 10000, 20 * 375, 999);
  EXPECT_NEAR(arl / 375.0, 1.0, 0.05);
}

TEST(EcddLimit, ValidatesOptions) {
  EcddCalibrationOptions o;
  o.p0 = 0.0;
  EXPECT_THROW(calibrate_ecdd_limit(o), ConfigError);
  o.p0 = 1.0;
  EXPECT_THROW(calibrate_ecdd_limit(o), ConfigError);
  o.p0 = 0.1;
  o.r = 1.0;
  EXPECT_THROW(calibrate_ecdd_limit(o), ConfigError);
}

}  // namespace
}  // namespace cdm
