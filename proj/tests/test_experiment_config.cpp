#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "cdm/calibration.hpp"
#include "cdm/csv.hpp"
#include "cdm/errors.hpp"
#include "cdm/experiment_config.hpp"
#include "test_support.hpp"

namespace cdm {
namespace {

using testing::TempDir;

const std::string kMinimal = R"({
  "format_version": 1,
  "seed": 5,
  "source": {"type": "gaussian", "means": [[0, 0], [2, 0]], "post_means": [[0, 0], [2, 1]]}
})";

std::string with(const std::string& extra) {
  return R"({"format_version": 1, "source": {"type": "gaussian", "means": [[0, 0], [2, 0]]}, )" + extra + "}";
}

TEST(Config, Defaults) {
  const auto c = parse_experiment_config(kMinimal);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.replicates, 1000u);
  EXPECT_EQ(c.horizon, 8000u);
  EXPECT_EQ(c.tau, 160u);
  EXPECT_EQ(c.bins, 16u);
  EXPECT_EQ(c.lambda, 0.03);
  EXPECT_EQ(c.arl0, 375.0);
  EXPECT_EQ(c.methods, (std::vector<std::string>{"cdm", "qtewma", "ecdd"}));
  EXPECT_EQ(c.hash.size(), 16u);
  const auto mix = c.gaussian_mixture(true);
  EXPECT_EQ(mix.post[1].mean, (std::vector<double>{2.0, 1.0}));
  EXPECT_EQ(mix.priors, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(c.gaussian_mixture(false).post[1].mean, (std::vector<double>{2.0, 0.0}));
}

TEST(Config, RejectsUnknownKeysNamingThem) {
  try {
    parse_experiment_config(with(R"("replicats": 10)"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("replicats"), std::string::npos) << e.what();
  }
  try {
    parse_experiment_config(with(R"("ecdd": {"lambda": 0.2})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos) << e.what();
  }
}

TEST(Config, VersionTypesAndRanges) {
  EXPECT_THROW(parse_experiment_config(R"({"format_version": 2, "source": {"type": "gaussian", "means": [[0]]}})"),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"source": {"type": "gaussian", "means": [[0]]}})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(with(R"("replicates": -3)")), ConfigError);
  EXPECT_THROW(parse_experiment_config(with(R"("lambda": "fast")")), ConfigError);
  EXPECT_THROW(parse_experiment_config(with(R"("lambda": 1.5)")), ConfigError);
  EXPECT_THROW(parse_experiment_config(with(R"("methods": ["cdm", "adwin"])")), ConfigError);
  EXPECT_THROW(parse_experiment_config(with(R"("labeled_fraction": 0)")), ConfigError);
  EXPECT_THROW(parse_experiment_config(with(R"("ecdd": {"classifier": "svm"})")), ConfigError);
  EXPECT_THROW(parse_experiment_config("{not json"), ParseError);
}

TEST(Config, HorizonMustCoverTenArl0) {
  EXPECT_THROW(parse_experiment_config(with(R"("horizon": 3000)")), ConfigError);
  EXPECT_NO_THROW(parse_experiment_config(with(R"("horizon": 3750)")));
  try {
    parse_experiment_config(with(R"("horizon": 3750, "arl0_overrides": {"ecdd": 400})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ecdd"), std::string::npos) << e.what();
  }
  const auto c = parse_experiment_config(with(R"("horizon": 4000, "arl0_overrides": {"ecdd": 400})"));
  EXPECT_EQ(c.arl0_for("ecdd"), 400.0);
  EXPECT_EQ(c.arl0_for("cdm"), 375.0);
}

TEST(Config, HashIgnoresFormattingButNotValues) {
  const auto a = parse_experiment_config(with(R"("seed": 1, "tau": 100)"));
  const auto b = parse_experiment_config(
      R"({ "tau":100,"seed":1,
           "source": {"means": [[0, 0], [2, 0]], "type": "gaussian"},
           "format_version": 1 })");
  const auto c = parse_experiment_config(with(R"("seed": 2, "tau": 100)"));
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
}

TEST(Config, GaussianSourceShapes) {
  EXPECT_THROW(parse_experiment_config(with(R"("grid": {"x_offsets": [1, 0]})")), ConfigError);
  EXPECT_THROW(parse_experiment_config(
                   R"({"format_version": 1, "source": {"type": "gaussian", "means": [[0, 0], [2, 0]],
                       "post_means": [[0, 0]]}})"),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(
                   R"({"format_version": 1, "source": {"type": "gaussian", "means": [[0, 0], [2, 0]],
                       "priors": [0.9, 0.3]}})"),
               ConfigError);
  const auto c = parse_experiment_config(
      R"({"format_version": 1, "source": {"type": "gaussian", "means": [[0, 0], [2, 0]],
          "priors": [0.7, 0.3], "covariances": [[[1, 0.5], [0.5, 1]], [[2, 0], [0, 2]]]}})");
  EXPECT_EQ(c.source.covariances.at(1)(1, 1), 2.0);
  EXPECT_EQ(source_classes(c), 2);
}

TEST(Config, CsvPathsResolveAgainstConfigDirectory) {
  TempDir dir("config");
  std::filesystem::create_directories(dir.path() / "data");
  write_csv(generate_stream(two_class_gaussian(2.0), 400, 1), dir.path() / "data" / "pre.csv", true);
  std::ofstream(dir / "cfg.json") << R"({"format_version": 1, "horizon": 4000,
      "source": {"type": "csv", "pre": "data/pre.csv"}})";
  const auto c = load_experiment_config(dir / "cfg.json");
  EXPECT_EQ(c.source.pre, dir.path() / "data" / "pre.csv");
  EXPECT_EQ(source_classes(c), 2);
  EXPECT_THROW(load_experiment_config(dir / "absent.json"), IoError);
  // Delay runs need a post-change pool.
  EXPECT_THROW(make_scenario(c, true), ConfigError);
}

TEST(ThresholdCacheTest, MemoizesAndChecksTables) {
  ExperimentConfig::Calibration cal;
  cal.replicates = 10000;
  cal.t_max = 170;
  cal.seed = 3;
  ThresholdCache cache(cal);
  const auto a = cache.get(4, 32, 0.03, 375.0);
  EXPECT_EQ(a, cache.get(4, 32, 0.03, 375.0));
  EXPECT_NE(a, cache.get(4, 32, 0.03, 400.0));
  EXPECT_EQ(a->info().train_size, 32u);

  TempDir dir("tables");
  a->save(dir / "t.json");
  cal.tables["cdm"] = dir / "t.json";
  ThresholdCache configured(cal);
  EXPECT_EQ(configured.for_method("cdm", 4, 32, 0.03, 375.0)->thresholds(), a->thresholds());
  EXPECT_THROW(configured.for_method("cdm", 8, 32, 0.03, 375.0), ConfigError);
}

}  // namespace
}  // namespace cdm
