#include "cdm/experiment_config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cdm/csv.hpp"
#include "cdm/errors.hpp"
#include "cdm/random.hpp"

namespace cdm {
namespace {

using json = nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked about.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, path(key));
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where + ": wrong type");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

std::vector<double> to_vector(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(Fields::convert<double>(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<double>> to_vectors(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_vector(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::pair<double, double> to_range(const json& v, const std::string& where) {
  const auto r = to_vector(v, where);
  if (r.size() != 2 || !(r[0] <= r[1])) throw ConfigError(where + ": expected [low, high]");
  return {r[0], r[1]};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void parse_source(Fields& top, ExperimentConfig& cfg, const std::filesystem::path& base) {
  const json* src = top.find("source");
  if (!src) throw ConfigError("source: required");
  Fields f(*src, "source");
  std::string type = "gaussian";
  f.get("type", type);
  auto& s = cfg.source;
  if (type == "gaussian") {
    s.kind = ExperimentConfig::SourceKind::kGaussian;
    const json* means = f.find("means");
    if (!means) throw ConfigError("source.means: required");
    s.means = to_vectors(*means, "source.means");
    if (const json* v = f.find("post_means")) s.post_means = to_vectors(*v, "source.post_means");
    if (const json* v = f.find("priors")) s.priors = to_vector(*v, "source.priors");
    if (const json* v = f.find("covariances")) {
      if (!v->is_array()) throw ConfigError("source.covariances: expected an array of matrices");
      for (std::size_t i = 0; i < v->size(); ++i) {
        const auto rows = to_vectors((*v)[i], "source.covariances[" + std::to_string(i) + "]");
        Matrix m = Matrix::with_cols(rows.empty() ? 0 : rows.front().size());
        for (const auto& r : rows) {
          if (r.size() != m.cols())
            throw ConfigError("source.covariances[" + std::to_string(i) + "]: ragged matrix");
          m.push_row(r);
        }
        s.covariances.push_back(std::move(m));
      }
    }
    cfg.gaussian_mixture(true).validate();
  } else if (type == "csv") {
    s.kind = ExperimentConfig::SourceKind::kCsv;
    std::string pre, post;
    f.get("pre", pre);
    f.get("post", post);
    if (pre.empty()) throw ConfigError("source.pre: required for csv sources");
    s.pre = resolve(base, pre);
    if (!post.empty()) s.post = resolve(base, post);
    f.get("label_column", s.label_column);
    f.get("lenient_labels", s.lenient_labels);
    if (const json* v = f.find("drifted_classes")) {
      if (!v->is_array()) throw ConfigError("source.drifted_classes: expected an array");
      for (const auto& m : *v) {
        const int label = Fields::convert<int>(m, "source.drifted_classes");
        if (label < 1) throw ConfigError("source.drifted_classes: labels start at 1");
        s.drifted_classes.push_back(label);
      }
    }
  } else {
    throw ConfigError("source.type: expected 'gaussian' or 'csv', got '" + type + "'");
  }
}

LabeledSet read_pool(const std::filesystem::path& path, const CsvSchema& schema) {
  const LabeledStream stream = read_csv_stream(path, schema);
  LabeledSet set(stream.dim());
  for (std::size_t t = 0; t < stream.size(); ++t)
    if (stream.labels[t] && *stream.labels[t] != kUnknownLabel) set.add(stream.features.row(t), *stream.labels[t]);
  return set;
}

struct Pools {
  std::shared_ptr<const LabeledSet> pre;
  std::shared_ptr<const LabeledSet> post;
};

Pools load_pools(const ExperimentConfig& cfg) {
  CsvSchema schema;
  schema.label_column = cfg.source.label_column;
  schema.lenient_labels = cfg.source.lenient_labels;
  schema.label_map = infer_label_map(cfg.source.pre, schema);
  Pools p;
  p.pre = std::make_shared<const LabeledSet>(read_pool(cfg.source.pre, schema));
  if (!cfg.source.post.empty()) {
    p.post = std::make_shared<const LabeledSet>(read_pool(cfg.source.post, schema));
  }
  return p;
}

}  // namespace

GaussianMixtureConfig ExperimentConfig::gaussian_mixture(bool with_change) const {
  GaussianMixtureConfig g = cdm::gaussian_mixture(source.means);
  if (!source.priors.empty()) g.priors = source.priors;
  if (!source.covariances.empty()) {
    if (source.covariances.size() != g.pre.size())
      throw ConfigError("source.covariances: expected one matrix per class");
    for (std::size_t m = 0; m < g.pre.size(); ++m) {
      g.pre[m].covariance = source.covariances[m];
      g.post[m].covariance = source.covariances[m];
    }
  }
  if (with_change && !source.post_means.empty()) {
    if (source.post_means.size() != g.pre.size())
      throw ConfigError("source.post_means: expected one mean per class");
    for (std::size_t m = 0; m < g.post.size(); ++m) g.post[m].mean = source.post_means[m];
  }
  g.tau = with_change ? tau : 0;
  g.validate();
  return g;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  ExperimentConfig cfg;
  {
    Fields f(root, "");
    int version = 0;
    f.get("format_version", version);
    if (version != kExperimentConfigVersion)
      throw ConfigError("format_version: expected " + std::to_string(kExperimentConfigVersion) + ", got " +
                        std::to_string(version));
    f.get("seed", cfg.seed);
    f.get("replicates", cfg.replicates);
    f.get("horizon", cfg.horizon);
    f.get("tau", cfg.tau);
    f.get("post_length", cfg.post_length);
    f.get("train_per_class", cfg.train_per_class);
    f.get("labeled_fraction", cfg.labeled_fraction);
    f.get("bins", cfg.bins);
    f.get("lambda", cfg.lambda);
    f.get("arl0", cfg.arl0);
    if (const json* o = f.find("arl0_overrides")) {
      Fields of(*o, "arl0_overrides");
      for (const char* method : {"cdm", "qtewma", "ecdd"}) {
        if (const json* v = of.find(method)) cfg.arl0_overrides[method] = Fields::convert<double>(*v, of.path(method));
      }
    }
    if (const json* m = f.find("methods")) {
      if (!m->is_array() || m->empty()) throw ConfigError("methods: expected a non-empty array");
      cfg.methods.clear();
      for (const auto& v : *m) {
        auto name = Fields::convert<std::string>(v, "methods");
        if (name != "cdm" && name != "qtewma" && name != "ecdd")
          throw ConfigError("methods: unknown method '" + name + "'");
        cfg.methods.push_back(std::move(name));
      }
    }
    if (const json* c = f.find("calibration")) {
      Fields cf(*c, "calibration");
      cf.get("replicates", cfg.calibration.replicates);
      cf.get("t_max", cfg.calibration.t_max);
      cf.get("seed", cfg.calibration.seed);
      if (const json* t = cf.find("tables")) {
        Fields tf(*t, "calibration.tables");
        for (const char* method : {"cdm", "qtewma"}) {
          std::string p;
          tf.get(method, p);
          if (!p.empty()) cfg.calibration.tables[method] = resolve(base_dir, p);
        }
      }
    }
    if (const json* e = f.find("ecdd")) {
      Fields ef(*e, "ecdd");
      ef.get("r", cfg.ecdd.r);
      std::string kind = to_string(cfg.ecdd.classifier.kind);
      ef.get("classifier", kind);
      try {
        cfg.ecdd.classifier.kind = parse_classifier_kind(kind);
      } catch (const Error& err) {
        throw ConfigError(std::string("ecdd.classifier: ") + err.what());
      }
      ef.get("k", cfg.ecdd.classifier.k);
      ef.get("cv_folds", cfg.ecdd.cv_folds);
      ef.get("calibration_replicates", cfg.ecdd.calibration_replicates);
    }
    if (const json* g = f.find("grid")) {
      Fields gf(*g, "grid");
      gf.get("drifted_class", cfg.grid.drifted_class);
      if (const json* v = gf.find("x_offsets")) std::tie(cfg.grid.x_lo, cfg.grid.x_hi) = to_range(*v, "grid.x_offsets");
      if (const json* v = gf.find("y_offsets")) std::tie(cfg.grid.y_lo, cfg.grid.y_hi) = to_range(*v, "grid.y_offsets");
      gf.get("nx", cfg.grid.nx);
      gf.get("ny", cfg.grid.ny);
      gf.get("error_samples", cfg.grid.error_samples);
    }
    parse_source(f, cfg, base_dir);
  }

  if (cfg.replicates == 0) throw ConfigError("replicates: must be positive");
  if (cfg.horizon == 0) throw ConfigError("horizon: must be positive");
  if (cfg.tau == 0) throw ConfigError("tau: must be positive");
  if (cfg.train_per_class == 0) throw ConfigError("train_per_class: must be positive");
  if (!(cfg.labeled_fraction > 0.0 && cfg.labeled_fraction <= 1.0))
    throw ConfigError("labeled_fraction: must be in (0, 1]");
  if (cfg.bins < 2) throw ConfigError("bins: must be at least 2");
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) throw ConfigError("lambda: must be in (0, 1)");
  if (!(cfg.arl0 >= 2.0)) throw ConfigError("arl0: must be at least 2");
  for (const auto& [method, target] : cfg.arl0_overrides)
    if (!(target >= 2.0)) throw ConfigError("arl0_overrides." + method + ": must be at least 2");
  for (const std::string& method : cfg.methods)
    if (static_cast<double>(cfg.horizon) < 10.0 * cfg.arl0_for(method))
      throw ConfigError("horizon: must be at least 10 times the ARL0 target of " + method);
  if (!(cfg.ecdd.r > 0.0 && cfg.ecdd.r < 1.0)) throw ConfigError("ecdd.r: must be in (0, 1)");
  if (cfg.ecdd.cv_folds < 2) throw ConfigError("ecdd.cv_folds: must be at least 2");
  if (cfg.grid.nx == 0 || cfg.grid.ny == 0) throw ConfigError("grid: nx and ny must be positive");

  cfg.hash = fnv1a_hex(root.dump());
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return parse_experiment_config(text.str(), path.parent_path());
}

std::shared_ptr<const ThresholdTable> ThresholdCache::get(std::size_t bins, std::size_t train_size, double lambda,
                                                          double arl0) {
  std::lock_guard lock(mutex_);
  auto& slot = tables_[{bins, train_size, lambda, arl0}];
  if (!slot) {
    CalibrationOptions o;
    o.bins = bins;
    o.train_size = train_size;
    o.lambda = lambda;
    o.arl0 = arl0;
    o.t_max = options_.t_max;
    o.replicates = options_.replicates;
    o.seed = options_.seed;
    slot = std::make_shared<const ThresholdTable>(calibrate_thresholds(o));
  }
  return slot;
}

std::shared_ptr<const ThresholdTable> ThresholdCache::for_method(const std::string& method, std::size_t bins,
                                                                 std::size_t train_size, double lambda,
                                                                 double arl0) {
  const auto it = options_.tables.find(method);
  if (it == options_.tables.end()) return get(bins, train_size, lambda, arl0);
  auto table = std::make_shared<const ThresholdTable>(ThresholdTable::load(it->second));
  table->check_compatible(bins, lambda, train_size);
  return table;
}

Label source_classes(const ExperimentConfig& config) {
  if (config.source.kind == ExperimentConfig::SourceKind::kGaussian)
    return static_cast<Label>(config.source.means.size());
  return load_pools(config).pre->num_classes();
}

std::vector<GridMethod> make_methods(const ExperimentConfig& config, Label classes, ThresholdCache& cache) {
  std::vector<GridMethod> out;
  const auto M = static_cast<std::size_t>(classes);
  CdmOptions base;
  base.bins = config.bins;
  base.lambda = config.lambda;
  base.num_classes = classes;
  base.label_policy = config.source.lenient_labels ? LabelPolicy::kLenient : LabelPolicy::kStrict;
  for (const std::string& name : config.methods) {
    if (name == "cdm") {
      out.push_back({name, cdm_factory(cache.for_method("cdm", config.bins, config.train_per_class, config.lambda,
                                                        config.arl0_for(name)),
                                       base)});
    } else if (name == "qtewma") {
      // The pooled detector gets as many bins and training points as all
      // class detectors together.
      out.push_back({name, pooled_qtewma_factory(cache.for_method("qtewma", M * config.bins,
                                                                  M * config.train_per_class, config.lambda,
                                                                  config.arl0_for(name)),
                                                 base)});
    } else if (name == "ecdd") {
      EcddSettings s;
      s.classifier = config.ecdd.classifier;
      s.r = config.ecdd.r;
      s.arl0 = config.arl0_for(name);
      s.cv_folds = config.ecdd.cv_folds;
      s.calibration_replicates = config.ecdd.calibration_replicates;
      s.calibration_seed = derive_seed(config.calibration.seed, 0x65636464ULL);
      out.push_back({name, ecdd_factory(std::make_shared<EcddLimitCache>(s))});
    } else {
      throw ConfigError("methods: unknown method '" + name + "'");
    }
  }
  return out;
}

ScenarioFactory make_scenario(const ExperimentConfig& config, bool with_change) {
  ScenarioFactory inner;
  if (config.source.kind == ExperimentConfig::SourceKind::kGaussian) {
    auto sampler = std::make_shared<const GaussianMixtureSampler>(config.gaussian_mixture(with_change));
    const std::size_t length = with_change ? config.tau + config.post_length : config.horizon;
    inner = gaussian_scenario(std::move(sampler), config.train_per_class, length);
  } else {
    Pools pools = load_pools(config);
    PoolScenarioOptions o;
    o.train_per_class = config.train_per_class;
    o.drifted_classes = config.source.drifted_classes;
    if (with_change) {
      if (!pools.post) throw ConfigError("source.post: required for delay experiments");
      o.tau = config.tau;
      o.post_length = config.post_length;
    } else {
      pools.post.reset();
      o.tau = config.horizon;
      o.post_length = 0;
    }
    inner = pool_scenario(pools.pre, pools.post, o);
  }
  if (config.labeled_fraction >= 1.0) return inner;
  return [inner = std::move(inner), fraction = config.labeled_fraction](std::uint64_t seed) {
    Scenario sc = inner(seed);
    sc.stream = std::make_unique<LabelDropSource>(std::move(sc.stream), fraction, derive_seed(seed, 2));
    return sc;
  };
}

namespace {

std::vector<ExperimentReport> run_benchmark(const ExperimentConfig& config, bool with_change) {
  ThresholdCache cache(config.calibration);
  const auto methods = make_methods(config, source_classes(config), cache);
  const ScenarioFactory scenario = make_scenario(config, with_change);
  const char* scenario_name = config.source.kind == ExperimentConfig::SourceKind::kGaussian ? "gaussian" : "csv";
  std::vector<ExperimentReport> reports;
  for (const GridMethod& m : methods) {
    ExperimentReport r = with_change
                             ? estimate_delay(m.factory, scenario, config.tau, config.replicates, config.seed)
                             : estimate_arl0(m.factory, scenario, config.replicates, config.horizon, config.seed);
    r.method = m.name;
    r.scenario = scenario_name;
    r.config_hash = config.hash;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace

std::vector<ExperimentReport> run_arl0_benchmark(const ExperimentConfig& config) {
  return run_benchmark(config, false);
}

std::vector<ExperimentReport> run_delay_benchmark(const ExperimentConfig& config) {
  return run_benchmark(config, true);
}

std::vector<GridCellResult> run_grid_benchmark(const ExperimentConfig& config) {
  if (config.source.kind != ExperimentConfig::SourceKind::kGaussian)
    throw ConfigError("grid: requires a gaussian source");
  const GaussianMixtureConfig base = config.gaussian_mixture(false);
  const Label dc = config.grid.drifted_class;
  if (dc < 1 || static_cast<std::size_t>(dc) > base.num_classes())
    throw ConfigError("grid.drifted_class: class " + std::to_string(dc) + " unknown");
  ThresholdCache cache(config.calibration);
  const auto methods = make_methods(config, static_cast<Label>(base.num_classes()), cache);
  const auto& mu = base.pre[static_cast<std::size_t>(dc - 1)].mean;
  GridOptions o;
  o.drifted_class = dc;
  o.xs = grid_axis(mu[0] + config.grid.x_lo, mu[0] + config.grid.x_hi, config.grid.nx);
  o.ys = grid_axis(mu[1] + config.grid.y_lo, mu[1] + config.grid.y_hi, config.grid.ny);
  o.replicates = config.replicates;
  o.train_per_class = config.train_per_class;
  o.tau = config.tau;
  o.post_length = config.post_length;
  o.error_samples = config.grid.error_samples;
  o.seed = config.seed;
  return run_grid_experiment(base, o, methods);
}

}  // namespace cdm
