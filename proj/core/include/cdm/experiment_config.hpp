#ifndef CDM_EXPERIMENT_CONFIG_HPP_
#define CDM_EXPERIMENT_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cdm/calibration.hpp"
#include "cdm/classifier.hpp"
#include "cdm/experiment.hpp"

namespace cdm {

inline constexpr int kExperimentConfigVersion = 1;

/// Benchmark description read from JSON. Relative paths are resolved against
/// the directory of the configuration file.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t replicates = 1000;
  std::size_t horizon = 8000;  // ARL0 runs
  std::size_t tau = 160;
  std::size_t post_length = 7000;
  std::size_t train_per_class = 256;
  double labeled_fraction = 1.0;
  std::vector<std::string> methods{"cdm", "qtewma", "ecdd"};
  std::size_t bins = 16;
  double lambda = 0.03;
  double arl0 = 375.0;
  /// Per-method ARL0 targets, e.g. to align a baseline's empirical ARL0.
  std::map<std::string, double> arl0_overrides;

  struct Calibration {
    std::size_t replicates = 100'000;
    std::size_t t_max = 1500;
    std::uint64_t seed = 0;
    /// Precomputed threshold tables per method ("cdm", "qtewma").
    std::map<std::string, std::filesystem::path> tables;
  } calibration;

  struct Ecdd {
    double r = 0.2;
    ClassifierSpec classifier{ClassifierKind::kLda, 9};
    std::size_t cv_folds = 5;
    std::size_t calibration_replicates = 2000;
  } ecdd;

  enum class SourceKind { kGaussian, kCsv };
  struct Source {
    SourceKind kind = SourceKind::kGaussian;
    // gaussian
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> post_means;  // empty: no change
    std::vector<double> priors;                    // empty: uniform
    std::vector<Matrix> covariances;               // empty: identity
    // csv
    std::filesystem::path pre;
    std::filesystem::path post;
    int label_column = -1;
    bool lenient_labels = false;
    std::vector<Label> drifted_classes;
  } source;

  struct Grid {
    Label drifted_class = 2;
    double x_lo = -1.5, x_hi = 0.5;  // offsets from the pre-change mean
    double y_lo = -1.0, y_hi = 1.0;
    std::size_t nx = 9, ny = 9;
    std::size_t error_samples = 20000;
  } grid;

  /// FNV-1a 64 of the canonical JSON text, as 16 hex digits.
  std::string hash;

  double arl0_for(const std::string& method) const {
    const auto it = arl0_overrides.find(method);
    return it == arl0_overrides.end() ? arl0 : it->second;
  }
  GaussianMixtureConfig gaussian_mixture(bool with_change) const;
};

/// Parses a configuration. Throws ConfigError naming the offending field for
/// unknown keys, wrong types, out-of-range values or a format_version other
/// than kExperimentConfigVersion; ParseError for malformed JSON.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});
/// Throws IoError when the file cannot be read.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Threshold tables shared across methods, calibrated on first use and
/// memoized by (bins, train size, lambda, ARL0).
class ThresholdCache {
 public:
  explicit ThresholdCache(ExperimentConfig::Calibration options) : options_(std::move(options)) {}

  std::shared_ptr<const ThresholdTable> get(std::size_t bins, std::size_t train_size, double lambda, double arl0);
  /// The table configured for `method`, checked against the requested
  /// parameters, or a calibrated one.
  std::shared_ptr<const ThresholdTable> for_method(const std::string& method, std::size_t bins,
                                                   std::size_t train_size, double lambda, double arl0);

 private:
  ExperimentConfig::Calibration options_;
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, double, double>, std::shared_ptr<const ThresholdTable>> tables_;
};

/// Detector factories for the configured methods; `classes` is M.
std::vector<GridMethod> make_methods(const ExperimentConfig& config, Label classes, ThresholdCache& cache);

/// Scenario for ARL0 (stationary) or delay (change at tau) runs.
ScenarioFactory make_scenario(const ExperimentConfig& config, bool with_change);

/// Number of classes of the configured source.
Label source_classes(const ExperimentConfig& config);

/// One report per configured method; scenario name "gaussian" or "csv".
std::vector<ExperimentReport> run_arl0_benchmark(const ExperimentConfig& config);
std::vector<ExperimentReport> run_delay_benchmark(const ExperimentConfig& config);
std::vector<GridCellResult> run_grid_benchmark(const ExperimentConfig& config);

}  // namespace cdm

#endif  // CDM_EXPERIMENT_CONFIG_HPP_
