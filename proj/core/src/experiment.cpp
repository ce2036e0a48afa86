#include "cdm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <utility>

#include "cdm/calibration.hpp"
#include "cdm/ecdd.hpp"
#include "cdm/errors.hpp"
#include "cdm/parallel.hpp"
#include "cdm/random.hpp"

namespace cdm {
namespace {

class CdmAdapter final : public OnlineDetector {
 public:
  explicit CdmAdapter(CdmMonitor monitor) : monitor_(std::move(monitor)) {}
  Decision process(const Sample& s) override { return monitor_.process(s); }

 private:
  CdmMonitor monitor_;
};

class PooledAdapter final : public OnlineDetector {
 public:
  explicit PooledAdapter(CdmMonitor monitor) : monitor_(std::move(monitor)) {}
  Decision process(const Sample& s) override {
    Decision d = monitor_.process(s.x, 1);
    d.m_star.reset();
    return d;
  }

 private:
  CdmMonitor monitor_;
};

class EcddAdapter final : public OnlineDetector {
 public:
  explicit EcddAdapter(EcddMonitor monitor) : monitor_(std::move(monitor)) {}
  Decision process(const Sample& s) override { return monitor_.process(s); }

 private:
  EcddMonitor monitor_;
};

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, ptr};
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// Mean and standard error of the mean.
std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// Rethrows `e` as the same error type with `prefix` prepended.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& prefix) {
  const std::string msg = prefix + e.what();
  if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
  if (dynamic_cast<const InputError*>(&e)) throw InputError(msg);
  if (dynamic_cast<const IoError*>(&e)) throw IoError(msg);
  if (dynamic_cast<const ParseError*>(&e)) throw ParseError(msg);
  if (dynamic_cast<const CalibrationError*>(&e)) throw CalibrationError(msg);
  if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
  throw Error(msg);
}

void run_one(const DetectorFactory& detector, const ScenarioFactory& scenario, std::size_t horizon,
             std::uint64_t seed, std::size_t i, RunRecord& rec) {
  rec.replicate = i;
  rec.seed = derive_seed(seed, i);
  Scenario sc = scenario(derive_seed(rec.seed, 0));
  if (!sc.stream) throw ConfigError("scenario produced no stream");
  auto det = detector(sc.training, derive_seed(rec.seed, 1));
  Sample s;
  while (rec.samples < horizon && sc.stream->next(s)) {
    ++rec.samples;
    const Decision d = det->process(s);
    if (d.drift) {
      rec.t_star = d.t_star;
      rec.m_star = d.m_star;
      break;
    }
  }
}

std::vector<RunRecord> run_replicates(const DetectorFactory& detector, const ScenarioFactory& scenario,
                                      std::size_t replicates, std::size_t horizon, std::uint64_t seed) {
  std::vector<RunRecord> records(replicates);
  parallel_for(replicates, [&](std::size_t i) {
    try {
      run_one(detector, scenario, horizon, seed, i, records[i]);
    } catch (const Error& e) {
      rethrow_with_context(e, "replicate " + std::to_string(i) + ": ");
    }
  });
  return records;
}

}  // namespace

// ---------------------------------------------------------------------------

DetectorFactory cdm_factory(std::shared_ptr<const ThresholdTable> thresholds, CdmOptions options) {
  if (!thresholds) throw ConfigError("cdm: threshold table required");
  return [thresholds = std::move(thresholds), options](const LabeledSet& training, std::uint64_t seed) {
    CdmOptions o = options;
    o.seed = seed;
    return std::unique_ptr<OnlineDetector>(
        std::make_unique<CdmAdapter>(CdmMonitor::fit(training, thresholds, o)));
  };
}

DetectorFactory pooled_qtewma_factory(std::shared_ptr<const ThresholdTable> thresholds, CdmOptions options) {
  if (!thresholds) throw ConfigError("qtewma: threshold table required");
  options.bins = thresholds->info().bins;
  options.lambda = thresholds->info().lambda;
  options.num_classes = 1;
  options.label_policy = LabelPolicy::kStrict;
  return [thresholds = std::move(thresholds), options](const LabeledSet& training, std::uint64_t seed) {
    LabeledSet pooled(training.features, std::vector<Label>(training.size(), 1));
    CdmOptions o = options;
    o.seed = seed;
    return std::unique_ptr<OnlineDetector>(
        std::make_unique<PooledAdapter>(CdmMonitor::fit(pooled, thresholds, o)));
  };
}

double EcddLimitCache::limit(double p0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ConfigError("ecdd: initial error rate outside [0, 1]");
  const double res = settings_.p0_resolution;
  const long max_key = std::lround(std::floor(0.5 / res));
  const long key = std::clamp(std::lround(p0 / res), 1L, std::max(1L, max_key));
  std::promise<double> promise;
  std::shared_future<double> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = limits_.find(key);
    if (it == limits_.end()) {
      future = promise.get_future().share();
      limits_.emplace(key, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      EcddCalibrationOptions o;
      o.p0 = static_cast<double>(key) * res;
      o.r = settings_.r;
      o.arl0 = settings_.arl0;
      o.replicates = settings_.calibration_replicates;
      o.seed = settings_.calibration_seed;
      promise.set_value(calibrate_ecdd_limit(o));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

DetectorFactory ecdd_factory(std::shared_ptr<EcddLimitCache> limits) {
  if (!limits) throw ConfigError("ecdd: limit cache required");
  return [limits = std::move(limits)](const LabeledSet& training, std::uint64_t seed) {
    const EcddSettings& s = limits->settings();
    const double p0 = cross_validated_error(s.classifier, training, s.cv_folds, seed);
    std::shared_ptr<const Classifier> clf = fit_classifier(s.classifier, training);
    EcddDetector det(p0, s.r, limits->limit(p0));
    return std::unique_ptr<OnlineDetector>(std::make_unique<EcddAdapter>(EcddMonitor(std::move(clf), det)));
  };
}

// ---------------------------------------------------------------------------

ScenarioFactory gaussian_scenario(std::shared_ptr<const GaussianMixtureSampler> sampler,
                                  std::size_t train_per_class, std::size_t stream_length) {
  if (!sampler) throw ConfigError("gaussian scenario: sampler required");
  return [sampler = std::move(sampler), train_per_class, stream_length](std::uint64_t seed) {
    Scenario sc;
    sc.training = draw_training_set(*sampler, train_per_class, derive_seed(seed, 0));
    sc.stream = std::make_unique<GaussianStreamSource>(sampler, stream_length, derive_seed(seed, 1));
    return sc;
  };
}

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const LabeledSet& set, Label classes) {
  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Label y = set.labels[i];
    if (y >= 1 && y <= classes) rows[static_cast<std::size_t>(y - 1)].push_back(i);
  }
  return rows;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

ScenarioFactory pool_scenario(std::shared_ptr<const LabeledSet> pre, std::shared_ptr<const LabeledSet> post,
                              PoolScenarioOptions options) {
  if (!pre) throw ConfigError("pool scenario: pre-change pool required");
  const Label classes = pre->num_classes();
  if (post && post->dim() != pre->dim()) throw ConfigError("pool scenario: pools differ in dimension");
  for (Label m : options.drifted_classes)
    if (m < 1 || m > classes) throw ConfigError("pool scenario: drifted class " + std::to_string(m) + " unknown");
  const std::vector<std::size_t> counts = pre->class_counts();
  std::vector<double> cdf(counts.size());
  std::partial_sum(counts.begin(), counts.end(), cdf.begin(),
                   [](double a, std::size_t b) { return a + static_cast<double>(b); });
  for (double& c : cdf) c /= cdf.back();
  std::vector<bool> drifted(static_cast<std::size_t>(classes), options.drifted_classes.empty());
  for (Label m : options.drifted_classes) drifted[static_cast<std::size_t>(m - 1)] = true;

  return [=](std::uint64_t seed) {
    Scenario sc;
    const std::vector<std::size_t> train_counts(static_cast<std::size_t>(classes), options.train_per_class);
    auto [train, rest] = subsample_without_replacement(*pre, train_counts, derive_seed(seed, 0));
    sc.training = std::move(train);
    Rng rng(derive_seed(seed, 1));
    auto pre_rows = rows_by_class(rest, classes);
    for (auto& r : pre_rows) shuffle(r, rng);
    std::vector<std::vector<std::size_t>> post_rows;
    if (post) {
      post_rows = rows_by_class(*post, classes);
      for (auto& r : post_rows) shuffle(r, rng);
    }
    const std::size_t length = options.tau + options.post_length;
    auto stream = std::make_shared<LabeledStream>(pre->dim());
    stream->source = "pool";
    stream->seed = seed;
    if (post) stream->tau = options.tau;
    for (std::size_t t = 1; t <= length; ++t) {
      const double u = rng.uniform();
      const auto m = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin());
      const bool from_post = post && t > options.tau && drifted[m];
      auto& rows = from_post ? post_rows[m] : pre_rows[m];
      if (rows.empty())
        throw ConfigError("pool scenario: class " + std::to_string(m + 1) + " exhausted in the " +
                          (from_post ? "post" : "pre") + "-change pool");
      const LabeledSet& src = from_post ? *post : rest;
      stream->add(src.features.row(rows.back()), static_cast<Label>(m + 1));
      rows.pop_back();
    }
    sc.stream = std::make_unique<StreamReplay>(std::move(stream));
    return sc;
  };
}

bool LabelDropSource::next(Sample& out) {
  if (!inner_->next(out)) return false;
  if (!rng_.bernoulli(fraction_)) out.label.reset();
  return true;
}

// ---------------------------------------------------------------------------

ExperimentReport summarize_arl0(std::vector<RunRecord> records, std::size_t horizon) {
  ExperimentReport rep;
  rep.kind = ReportKind::kArl0;
  rep.replicates = records.size();
  rep.horizon = horizon;
  std::vector<double> times;
  for (const RunRecord& r : records) {
    if (r.t_star) {
      ++rep.detections;
      times.push_back(static_cast<double>(*r.t_star));
    } else {
      ++rep.censored;
    }
  }
  rep.valid = times.size();
  if (!times.empty()) {
    const auto [mean, se] = mean_and_se(times);
    rep.estimate = mean;
    rep.std_error = se;
  }
  rep.records = std::move(records);
  return rep;
}

ExperimentReport summarize_delay(std::vector<RunRecord> records, std::size_t tau) {
  ExperimentReport rep;
  rep.kind = ReportKind::kDelay;
  rep.replicates = records.size();
  rep.tau = tau;
  std::vector<double> delays;
  for (const RunRecord& r : records) {
    rep.horizon = std::max(rep.horizon, r.samples);
    if (!r.t_star) {
      ++rep.censored;
      continue;
    }
    ++rep.detections;
    if (*r.t_star <= tau)
      ++rep.false_alarms;
    else
      delays.push_back(static_cast<double>(*r.t_star - tau));
  }
  rep.valid = delays.size();
  if (!delays.empty()) {
    const auto [mean, se] = mean_and_se(delays);
    rep.estimate = mean;
    rep.std_error = se;
  }
  rep.records = std::move(records);
  return rep;
}

ExperimentReport estimate_arl0(const DetectorFactory& detector, const ScenarioFactory& scenario,
                               std::size_t replicates, std::size_t horizon, std::uint64_t seed) {
  if (replicates == 0) throw ConfigError("replicates must be positive");
  if (horizon == 0) throw ConfigError("horizon must be positive");
  ExperimentReport rep = summarize_arl0(run_replicates(detector, scenario, replicates, horizon, seed), horizon);
  rep.seed = seed;
  return rep;
}

ExperimentReport estimate_delay(const DetectorFactory& detector, const ScenarioFactory& scenario,
                                std::size_t tau, std::size_t replicates, std::uint64_t seed) {
  if (replicates == 0) throw ConfigError("replicates must be positive");
  if (tau == 0) throw ConfigError("tau must be positive for a delay experiment");
  ExperimentReport rep = summarize_delay(
      run_replicates(detector, scenario, replicates, std::numeric_limits<std::size_t>::max(), seed), tau);
  rep.seed = seed;
  return rep;
}

void write_report_csv_header(std::ostream& out) {
  out << "method,scenario,kind,replicates,tau,horizon,estimate,std_error,ci_low,ci_high,detections,"
         "false_alarms,censored,valid,degenerate,seed,config_hash\n";
}

void write_report_csv_row(std::ostream& out, const ExperimentReport& r) {
  out << r.method << ',' << r.scenario << ',' << (r.kind == ReportKind::kArl0 ? "arl0" : "delay") << ','
      << r.replicates << ',' << (r.tau ? std::to_string(*r.tau) : std::string()) << ',' << r.horizon << ','
      << format_optional(r.estimate) << ',' << (r.estimate ? format_double(r.std_error) : "") << ','
      << (r.estimate ? format_double(r.ci_low()) : "") << ',' << (r.estimate ? format_double(r.ci_high()) : "")
      << ',' << r.detections << ',' << r.false_alarms << ',' << r.censored << ',' << r.valid << ','
      << (r.degenerate() ? "true" : "false") << ',' << r.seed << ',' << r.config_hash << '\n';
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << "method,scenario,replicate,seed,tau,t_star,m_star,samples\n";
  for (const ExperimentReport& rep : reports)
    for (const RunRecord& r : rep.records)
      out << rep.method << ',' << rep.scenario << ',' << r.replicate << ',' << r.seed << ','
          << (rep.tau ? std::to_string(*rep.tau) : "") << ',' << (r.t_star ? std::to_string(*r.t_star) : "") << ',' << (r.m_star ? std::to_string(*r.m_star) : "")
          << ',' << r.samples << '\n';
}

// ---------------------------------------------------------------------------

double estimate_error_rate(const Classifier& classifier, const GaussianMixtureSampler& mixture, Regime regime,
                           std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ConfigError("error rate: samples must be positive");
  if (classifier.dim() != mixture.config().dim()) throw ConfigError("error rate: dimension mismatch");
  Rng rng(seed);
  std::vector<double> x(mixture.config().dim());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Label y = mixture.draw_label(rng);
    mixture.draw(y, regime == Regime::kPostChange, rng, x);
    if (classifier.predict(x) != y) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(samples);
}

std::vector<double> grid_axis(double lo, double hi, std::size_t n) {
  if (n == 0) throw ConfigError("grid axis needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = hi;
  return v;
}

std::vector<GridCellResult> run_grid_experiment(const GaussianMixtureConfig& base, const GridOptions& options,
                                                const std::vector<GridMethod>& methods) {
  base.validate();
  const auto dc = static_cast<std::size_t>(options.drifted_class);
  if (options.drifted_class < 1 || dc > base.num_classes())
    throw ConfigError("grid: drifted class " + std::to_string(options.drifted_class) + " unknown");
  if (base.dim() < 2) throw ConfigError("grid: the mixture must have at least two dimensions");
  if (options.tau == 0) throw ConfigError("grid: tau must be positive");

  std::vector<GridCellResult> out;
  for (double y : options.ys) {
    for (double x : options.xs) {
      GaussianMixtureConfig cfg = base;
      cfg.tau = options.tau;
      cfg.post[dc - 1].mean[0] = x;
      cfg.post[dc - 1].mean[1] = y;
      GridCellResult cell;
      cell.mu_x = x;
      cell.mu_y = y;
      std::vector<GridCellResult> cell_rows;
      try {
        auto sampler = std::make_shared<const GaussianMixtureSampler>(cfg);
        const GaussianClass& p = cfg.pre[dc - 1];
        const GaussianClass& q = cfg.post[dc - 1];
        cell.skl = skl_gaussian(p.mean, p.covariance, q.mean, q.covariance);
        double sq = 0.0;
        for (std::size_t j = 0; j < p.mean.size(); ++j) sq += (q.mean[j] - p.mean[j]) * (q.mean[j] - p.mean[j]);
        cell.shift_norm = std::sqrt(sq);
        const auto clf = fit_classifier(options.error_classifier,
                                        draw_training_set(*sampler, options.train_per_class,
                                                          derive_seed(options.seed, 0x6572726F72ULL)));
        const std::uint64_t err_seed = derive_seed(options.seed, 0x6576616CULL);
        cell.p1_minus_p0 =
            estimate_error_rate(*clf, *sampler, Regime::kPostChange, options.error_samples, err_seed) -
            estimate_error_rate(*clf, *sampler, Regime::kPreChange, options.error_samples, err_seed);
        const ScenarioFactory scenario =
            gaussian_scenario(sampler, options.train_per_class, options.tau + options.post_length);
        for (const GridMethod& m : methods) {
          GridCellResult row = cell;
          row.method = m.name;
          try {
            const ExperimentReport rep =
                estimate_delay(m.factory, scenario, options.tau, options.replicates, options.seed);
            row.mean_delay = rep.estimate;
            row.std_error = rep.std_error;
            row.valid = rep.valid;
            row.false_alarms = rep.false_alarms;
            row.censored = rep.censored;
          } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
          }
          cell_rows.push_back(std::move(row));
        }
      } catch (const std::exception& e) {
        cell_rows.clear();
        for (const GridMethod& m : methods) {
          GridCellResult row = cell;
          row.method = m.name;
          row.failed = true;
          row.error = e.what();
          cell_rows.push_back(std::move(row));
        }
      }
      for (auto& r : cell_rows) out.push_back(std::move(r));
    }
  }
  return out;
}

void write_grid_csv(std::ostream& out, const std::vector<GridCellResult>& cells) {
  out << "mu_x,mu_y,method,mean_delay,skl,p1_minus_p0,shift_norm,std_error,valid,false_alarms,censored,status\n";
  for (const GridCellResult& c : cells) {
    std::string status = c.failed ? "failed: " + c.error : (c.mean_delay ? "ok" : "degenerate");
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << format_double(c.mu_x) << ',' << format_double(c.mu_y) << ',' << c.method << ','
        << format_optional(c.mean_delay) << ',' << format_double(c.skl) << ',' << format_double(c.p1_minus_p0)
        << ',' << format_double(c.shift_norm) << ',' << format_double(c.std_error) << ',' << c.valid << ','
        << c.false_alarms << ',' << c.censored << ',' << status << '\n';
  }
}

std::vector<double> average_ranks(const std::vector<std::vector<double>>& delays) {
  if (delays.empty()) return {};
  const std::size_t scenarios = delays.front().size();
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (delays[i].size() != scenarios)
      throw ConfigError("ranks: method " + std::to_string(i) + " has " + std::to_string(delays[i].size()) +
                        " scenarios, expected " + std::to_string(scenarios));
    for (std::size_t j = 0; j < scenarios; ++j)
      if (std::isnan(delays[i][j]))
        throw ConfigError("ranks: missing delay for method " + std::to_string(i) + " on scenario " +
                          std::to_string(j));
  }
  std::vector<double> ranks(delays.size(), 0.0);
  std::vector<std::size_t> order(delays.size());
  for (std::size_t j = 0; j < scenarios; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return delays[a][j] < delays[b][j]; });
    for (std::size_t lo = 0; lo < order.size();) {
      std::size_t hi = lo + 1;
      while (hi < order.size() && delays[order[hi]][j] == delays[order[lo]][j]) ++hi;
      const double shared = (static_cast<double>(lo + 1) + static_cast<double>(hi)) / 2.0;
      for (std::size_t k = lo; k < hi; ++k) ranks[order[k]] += shared;
      lo = hi;
    }
  }
  if (scenarios > 0)
    for (double& r : ranks) r /= static_cast<double>(scenarios);
  return ranks;
}

}  // namespace cdm
