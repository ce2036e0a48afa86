#ifndef CDM_EXPERIMENT_HPP_
#define CDM_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cdm/classifier.hpp"
#include "cdm/datastreams.hpp"
#include "cdm/detection.hpp"
#include "cdm/monitor.hpp"
#include "cdm/threshold_table.hpp"

namespace cdm {

// ---------------------------------------------------------------------------
// Detectors and scenarios

/// Any monitor that consumes a stream one sample at a time.
class OnlineDetector {
 public:
  virtual ~OnlineDetector() = default;
  virtual Decision process(const Sample& s) = 0;
};

/// One replicate: a training set and the stream to monitor.
struct Scenario {
  LabeledSet training;
  std::unique_ptr<SampleSource> stream;
};

using ScenarioFactory = std::function<Scenario(std::uint64_t seed)>;
using DetectorFactory =
    std::function<std::unique_ptr<OnlineDetector>(const LabeledSet& training, std::uint64_t seed)>;

/// CDM with per-class histograms; `options.seed` is replaced by the factory
/// seed.
DetectorFactory cdm_factory(std::shared_ptr<const ThresholdTable> thresholds, CdmOptions options = {});

/// QT-EWMA on the overall distribution: a one-class CDM fitted on the pooled
/// training set with thresholds->info().bins bins. Every sample is
/// monitored, labeled or not.
DetectorFactory pooled_qtewma_factory(std::shared_ptr<const ThresholdTable> thresholds,
                                      CdmOptions options = {});

struct EcddSettings {
  ClassifierSpec classifier{ClassifierKind::kLda, 9};
  double r = 0.2;
  double arl0 = 375.0;
  std::size_t cv_folds = 5;
  std::size_t calibration_replicates = 2000;
  std::uint64_t calibration_seed = 0;
  /// Initial error rates are rounded to this grid before looking up L.
  double p0_resolution = 0.01;
};

/// Thread-safe memo of calibrated ECDD limits keyed by the rounded p0.
class EcddLimitCache {
 public:
  explicit EcddLimitCache(EcddSettings settings) : settings_(std::move(settings)) {}
  double limit(double p0);
  const EcddSettings& settings() const noexcept { return settings_; }

 private:
  EcddSettings settings_;
  std::mutex mutex_;
  std::map<long, std::shared_future<double>> limits_;
};

/// ECDD: fits the classifier on the training set, estimates p0 by
/// cross validation and takes L from the cache.
DetectorFactory ecdd_factory(std::shared_ptr<EcddLimitCache> limits);

/// Training set and stream drawn from a Gaussian mixture (stream change
/// point = sampler config tau).
ScenarioFactory gaussian_scenario(std::shared_ptr<const GaussianMixtureSampler> sampler,
                                  std::size_t train_per_class, std::size_t stream_length);

struct PoolScenarioOptions {
  std::size_t train_per_class = 256;
  std::size_t tau = 160;
  std::size_t post_length = 7000;
  /// Classes whose post-change samples come from the post pool; empty means
  /// every class.
  std::vector<Label> drifted_classes;
};

/// Resampling from finite labeled pools. Per replicate, training samples are
/// drawn without replacement from `pre`; the stream takes tau samples from
/// what is left of `pre`, then post_length samples whose class follows the
/// pre-pool class frequencies and whose features come from `post` for
/// drifted classes and from `pre` otherwise, all without replacement. A null
/// `post` gives a stationary stream of tau + post_length samples.
ScenarioFactory pool_scenario(std::shared_ptr<const LabeledSet> pre, std::shared_ptr<const LabeledSet> post,
                              PoolScenarioOptions options);

/// Drops each label with probability 1 - labeled_fraction.
class LabelDropSource final : public SampleSource {
 public:
  LabelDropSource(std::unique_ptr<SampleSource> inner, double labeled_fraction, std::uint64_t seed)
      : inner_(std::move(inner)), fraction_(labeled_fraction), rng_(seed) {}
  bool next(Sample& out) override;

 private:
  std::unique_ptr<SampleSource> inner_;
  double fraction_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Reports

struct RunRecord {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> t_star;
  std::optional<Label> m_star;
  std::size_t samples = 0;  // samples consumed
};

enum class ReportKind { kArl0, kDelay };

struct ExperimentReport {
  std::string method;
  std::string scenario;
  ReportKind kind = ReportKind::kArl0;
  std::size_t replicates = 0;
  std::optional<std::size_t> tau;
  std::size_t horizon = 0;
  /// Empirical ARL0 (mean t* over detecting runs) or mean delay (mean t* - tau
  /// over runs with t* > tau). Empty when no run qualifies.
  std::optional<double> estimate;
  double std_error = 0.0;
  std::size_t detections = 0;
  std::size_t false_alarms = 0;  // delay runs with t* <= tau
  std::size_t censored = 0;      // runs without any detection
  std::size_t valid = 0;         // runs entering the estimate
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<RunRecord> records;

  bool degenerate() const noexcept { return !estimate.has_value(); }
  double ci_low() const noexcept { return estimate.value_or(0.0) - 1.96 * std_error; }
  double ci_high() const noexcept { return estimate.value_or(0.0) + 1.96 * std_error; }
};

ExperimentReport summarize_arl0(std::vector<RunRecord> records, std::size_t horizon);
ExperimentReport summarize_delay(std::vector<RunRecord> records, std::size_t tau);

/// Runs `replicates` stationary streams up to `horizon` samples each.
/// Replicate i uses derive_seed(seed, i) for its scenario and detector, so
/// the report does not depend on the thread count.
ExperimentReport estimate_arl0(const DetectorFactory& detector, const ScenarioFactory& scenario,
                               std::size_t replicates, std::size_t horizon, std::uint64_t seed);

/// Runs `replicates` streams with change point tau to exhaustion or first
/// detection. Throws ConfigError when tau == 0.
ExperimentReport estimate_delay(const DetectorFactory& detector, const ScenarioFactory& scenario,
                                std::size_t tau, std::size_t replicates, std::uint64_t seed);

void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const ExperimentReport& report);
void write_records_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);

// ---------------------------------------------------------------------------
// Error rates, grid experiment, ranks

enum class Regime { kPreChange, kPostChange };

/// Monte Carlo misclassification rate of `classifier` on the mixture.
double estimate_error_rate(const Classifier& classifier, const GaussianMixtureSampler& mixture, Regime regime,
                           std::size_t samples, std::uint64_t seed);

struct GridMethod {
  std::string name;
  DetectorFactory factory;
};

struct GridOptions {
  Label drifted_class = 2;
  std::vector<double> xs;  // absolute post-change coordinates of mean[0]
  std::vector<double> ys;  // absolute post-change coordinates of mean[1]
  std::size_t replicates = 500;
  std::size_t train_per_class = 256;
  std::size_t tau = 160;
  std::size_t post_length = 7000;
  std::size_t error_samples = 20000;
  ClassifierSpec error_classifier{ClassifierKind::kLda, 9};
  std::uint64_t seed = 0;
};

struct GridCellResult {
  double mu_x = 0.0;
  double mu_y = 0.0;
  std::string method;
  std::optional<double> mean_delay;
  double std_error = 0.0;
  std::size_t valid = 0;
  std::size_t false_alarms = 0;
  std::size_t censored = 0;
  double skl = 0.0;
  double shift_norm = 0.0;
  double p1_minus_p0 = 0.0;
  bool failed = false;
  std::string error;
};

/// n evenly spaced points from lo to hi inclusive.
std::vector<double> grid_axis(double lo, double hi, std::size_t n);

/// For each cell, moves the drifted class mean to (x, y) after tau and
/// measures every method's mean delay on the same replicate seeds. A cell
/// that throws is reported as failed and the run continues.
std::vector<GridCellResult> run_grid_experiment(const GaussianMixtureConfig& base, const GridOptions& options,
                                                const std::vector<GridMethod>& methods);

void write_grid_csv(std::ostream& out, const std::vector<GridCellResult>& cells);

/// Average rank per method over scenarios; delays[i][j] is method i on
/// scenario j. Rank 1 is the smallest delay, ties share the mean rank.
/// Throws ConfigError on a missing (NaN) or ragged entry.
std::vector<double> average_ranks(const std::vector<std::vector<double>>& delays);

}  // namespace cdm

#endif  // CDM_EXPERIMENT_HPP_
