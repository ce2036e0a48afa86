#include "cli.hpp"

#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdm/calibration.hpp"
#include "cdm/classifier.hpp"
#include "cdm/csv.hpp"
#include "cdm/datastreams.hpp"
#include "cdm/ecdd.hpp"
#include "cdm/errors.hpp"
#include "cdm/experiment.hpp"
#include "cdm/experiment_config.hpp"
#include "cdm/monitor.hpp"
#include "cdm/parallel.hpp"
#include "cdm/threshold_table.hpp"

namespace cdm::cli {
namespace {

struct CalibrateArgs {
  CalibrationOptions options;
  std::string out;
};

struct MonitorArgs {
  std::string method;
  std::string train;
  std::string stream;
  std::string thresholds;
  bool lenient = false;
  std::uint64_t seed = 0;
  int label_column = -1;
  std::string label_name;
  std::size_t train_per_class = 0;
  std::string format = "json";
  // ECDD
  std::string classifier = "lda";
  std::size_t neighbors = 9;
  double r = kDefaultEcddWeight;
  double arl0 = 375.0;
  std::optional<double> limit;
  std::size_t cv_folds = 5;
  std::size_t calibration_replicates = 2000;
};

struct BenchArgs {
  std::string config;
  std::string out;
  std::string records;
};

struct GenerateArgs {
  std::string config;
  std::string train;
  std::string stream;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

void calibrate(const CalibrateArgs& a, std::ostream& out) {
  const ThresholdTable table = calibrate_thresholds(a.options);
  table.save(a.out);
  const auto& info = table.info();
  out << "wrote " << a.out << ": K=" << info.bins << " N=" << info.train_size << " lambda=" << info.lambda
      << " arl0=" << info.arl0 << " t_max=" << info.t_max << " replicates=" << info.replicates << '\n';
}

CsvSchema schema_for(const MonitorArgs& a) {
  CsvSchema s;
  s.label_column = a.label_column;
  if (!a.label_name.empty()) s.label_column_name = a.label_name;
  return s;
}

DetectionReport monitor(const MonitorArgs& a) {
  CsvSchema schema = schema_for(a);
  schema.label_map = infer_label_map(a.train, schema);
  LabeledSet training = read_labeled_csv(a.train, schema);
  if (training.size() == 0) throw InputError(a.train + ": no training samples");
  if (a.train_per_class > 0) {
    const std::vector<std::size_t> counts(static_cast<std::size_t>(training.num_classes()), a.train_per_class);
    training = subsample_without_replacement(training, counts, derive_seed(a.seed, 0x7472)).first;
  }
  CsvSchema stream_schema = schema;
  stream_schema.lenient_labels = a.lenient;
  CsvSampleReader reader(a.stream, stream_schema);
  if (reader.dim() != training.dim()) {
    throw InputError(a.stream + ": " + std::to_string(reader.dim()) + " features, training has " +
                     std::to_string(training.dim()));
  }
  Sample s;

  if (a.method == "cdm" || a.method == "qtewma") {
    if (a.thresholds.empty()) throw ConfigError("--thresholds is required for method " + a.method);
    auto table = std::make_shared<const ThresholdTable>(ThresholdTable::load(a.thresholds));
    CdmOptions o;
    o.bins = table->info().bins;
    o.lambda = table->info().lambda;
    o.seed = a.seed;
    o.label_policy = a.lenient ? LabelPolicy::kLenient : LabelPolicy::kStrict;
    const bool pooled = a.method == "qtewma";
    if (pooled) {
      training.labels.assign(training.size(), 1);
      o.num_classes = 1;
    } else {
      o.num_classes = training.num_classes();
    }
    CdmMonitor m = CdmMonitor::fit(training, table, o);
    while (!m.detected() && reader.next(s)) {
      if (pooled)
        m.process(s.x, 1);
      else
        m.process(s);
    }
    DetectionReport rep = m.report(a.method);
    if (pooled) rep.m_star.reset();
    return rep;
  }

  if (a.method == "ecdd") {
    ClassifierSpec spec{parse_classifier_kind(a.classifier), a.neighbors};
    const double p0 = cross_validated_error(spec, training, a.cv_folds, a.seed);
    double limit = 0.0;
    if (a.limit) {
      limit = *a.limit;
    } else {
      EcddCalibrationOptions o;
      o.p0 = p0;
      o.r = a.r;
      o.arl0 = a.arl0;
      o.replicates = a.calibration_replicates;
      o.seed = a.seed;
      limit = calibrate_ecdd_limit(o);
    }
    EcddMonitor m(fit_classifier(spec, training), EcddDetector(p0, a.r, limit));
    while (!m.detected() && reader.next(s)) {
      if (s.label == kUnknownLabel) s.label.reset();
      m.process(s);
    }
    return m.report();
  }
  throw ConfigError("--method: unknown method '" + a.method + "'");
}

void bench(const std::string& kind, const BenchArgs& a, std::ostream& out) {
  const ExperimentConfig config = load_experiment_config(a.config);
  if (kind == "grid") {
    const auto cells = run_grid_benchmark(config);
    auto file = open_output(a.out);
    write_grid_csv(file, cells);
    finish_output(file, a.out);
    out << "wrote " << cells.size() << " grid rows to " << a.out << '\n';
    return;
  }
  const auto reports = kind == "arl0" ? run_arl0_benchmark(config) : run_delay_benchmark(config);
  auto file = open_output(a.out);
  write_report_csv_header(file);
  for (const auto& r : reports) write_report_csv_row(file, r);
  finish_output(file, a.out);
  if (!a.records.empty()) {
    auto rec = open_output(a.records);
    write_records_csv(rec, reports);
    finish_output(rec, a.records);
  }
  for (const auto& r : reports) {
    out << r.method << ' ' << kind << ' ';
    if (r.estimate)
      out << *r.estimate << " +- " << r.std_error;
    else
      out << "undefined";
    out << " (valid " << r.valid << ", false alarms " << r.false_alarms << ", censored " << r.censored << ")\n";
  }
}

void generate(const GenerateArgs& a, std::ostream& out) {
  const ExperimentConfig config = load_experiment_config(a.config);
  if (config.source.kind != ExperimentConfig::SourceKind::kGaussian)
    throw ConfigError("generate: requires a gaussian source");
  const GaussianMixtureConfig mix = config.gaussian_mixture(true);
  const GaussianMixtureSampler sampler(mix);
  const LabeledSet training = draw_training_set(sampler, config.train_per_class, derive_seed(config.seed, 0));
  LabeledStream train_stream(training.dim());
  for (std::size_t i = 0; i < training.size(); ++i) train_stream.add(training.features.row(i), training.labels[i]);
  write_csv(train_stream, a.train, true);
  const LabeledStream stream = generate_stream(mix, config.tau + config.post_length, derive_seed(config.seed, 1));
  write_csv(stream, a.stream, true);
  out << "wrote " << training.size() << " training and " << stream.size() << " stream samples (tau "
      << config.tau << ")\n";
}

int report_error(std::ostream& err, const char* kind, const std::exception& e, int code) {
  err << "cdm: " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concept drift monitoring toolkit", "cdm"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: CDM_THREADS or hardware)");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Calibrate QT-EWMA thresholds for a target ARL0");
  c->add_option("--k", cal.options.bins, "Histogram bins")->capture_default_str();
  c->add_option("--lambda", cal.options.lambda, "EWMA weight")->capture_default_str();
  c->add_option("--arl0", cal.options.arl0, "Target average run length")->capture_default_str();
  c->add_option("--train-size", cal.options.train_size, "Training points per histogram")->capture_default_str();
  c->add_option("--t-max", cal.options.t_max, "Last tabulated step")->capture_default_str();
  c->add_option("--replicates", cal.options.replicates, "Simulated streams")->capture_default_str();
  c->add_option("--seed", cal.options.seed, "Master seed")->capture_default_str();
  c->add_option("--survivor-floor", cal.options.survivor_floor, "Minimum survivors per step")
      ->capture_default_str();
  c->add_option("--out", cal.out, "Output table")->required();

  MonitorArgs mon;
  auto* m = app.add_subcommand("monitor", "Monitor a CSV stream and print a detection report");
  m->add_option("--method", mon.method, "cdm, qtewma or ecdd")
      ->required()
      ->check(CLI::IsMember({"cdm", "qtewma", "ecdd"}));
  m->add_option("--train", mon.train, "Training CSV")->required();
  m->add_option("--stream", mon.stream, "Stream CSV")->required();
  m->add_option("--thresholds", mon.thresholds, "Threshold table (cdm, qtewma)");
  m->add_flag("--lenient-labels", mon.lenient, "Skip samples with unknown labels");
  m->add_option("--seed", mon.seed, "Seed for histograms and cross validation")->capture_default_str();
  m->add_option("--label-column", mon.label_column, "Zero-based label column, negative from the end")
      ->capture_default_str();
  m->add_option("--label-name", mon.label_name, "Label column by header name");
  m->add_option("--train-per-class", mon.train_per_class, "Subsample this many training points per class");
  m->add_option("--format", mon.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  m->add_option("--classifier", mon.classifier, "ECDD classifier: lda or knn")->capture_default_str();
  m->add_option("--neighbors", mon.neighbors, "k for the k-NN classifier")->capture_default_str();
  m->add_option("--ecdd-r", mon.r, "ECDD EWMA weight")->capture_default_str();
  m->add_option("--arl0", mon.arl0, "ECDD target ARL0 when --ecdd-limit is absent")->capture_default_str();
  m->add_option("--ecdd-limit", mon.limit, "ECDD control limit L");
  m->add_option("--cv-folds", mon.cv_folds, "Folds for the initial error estimate")->capture_default_str();
  m->add_option("--calibration-replicates", mon.calibration_replicates, "ECDD limit calibration runs")
      ->capture_default_str();

  BenchArgs ben;
  auto* b = app.add_subcommand("bench", "Run a benchmark described by a JSON config");
  b->require_subcommand(1);
  std::string bench_kind;
  for (const char* kind : {"arl0", "delay", "grid"}) {
    auto* k = b->add_subcommand(kind, std::string("Estimate ") +
                                          (std::string(kind) == "arl0"    ? "empirical ARL0"
                                           : std::string(kind) == "delay" ? "mean detection delays"
                                                                          : "delays over a mean-shift grid"));
    k->add_option("--config", ben.config, "Experiment config")->required();
    k->add_option("--out", ben.out, "Output CSV")->required();
    if (std::string(kind) != "grid") k->add_option("--records", ben.records, "Per-replicate CSV");
    k->callback([&bench_kind, kind] { bench_kind = kind; });
  }

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a Gaussian training set and drift stream as CSV");
  g->add_option("--config", gen.config, "Experiment config with a gaussian source")->required();
  g->add_option("--train", gen.train, "Training CSV to write")->required();
  g->add_option("--stream", gen.stream, "Stream CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (c->parsed()) {
      calibrate(cal, out);
    } else if (m->parsed()) {
      const DetectionReport rep = monitor(mon);
      if (mon.format == "csv")
        out << csv_header(rep) << '\n' << to_csv_row(rep) << '\n';
      else
        out << to_json(rep) << '\n';
    } else if (b->parsed()) {
      bench(bench_kind, ben, out);
    } else if (g->parsed()) {
      generate(gen, out);
    }
  } catch (const IoError& e) {
    return report_error(err, "I/O error", e, kIoFailure);
  } catch (const ParseError& e) {
    return report_error(err, "parse error", e, kIoFailure);
  } catch (const InputError& e) {
    return report_error(err, "input error", e, kIoFailure);
  } catch (const ConfigError& e) {
    return report_error(err, "configuration error", e, kConfigFailure);
  } catch (const CalibrationError& e) {
    return report_error(err, "calibration error", e, kConfigFailure);
  } catch (const NumericError& e) {
    return report_error(err, "numeric error", e, kConfigFailure);
  } catch (const std::exception& e) {
    return report_error(err, "error", e, kConfigFailure);
  }
  return kOk;
}

}  // namespace cdm::cli
