#include "cdm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "cdm/ecdd.hpp"
#include "cdm/errors.hpp"
#include "cdm/parallel.hpp"
#include "cdm/random.hpp"
#include "text_io.hpp"

namespace cdm {

namespace {

constexpr int kTableFormatVersion = 1;

bool same_double(double a, double b) { return a == b; }

}  // namespace

// ---------------------------------------------------------------------------
// ThresholdTable

ThresholdTable::ThresholdTable(ThresholdTableInfo info, std::vector<double> thresholds,
                               std::vector<double> tie_probabilities)
    : info_(info), thresholds_(std::move(thresholds)), tie_probs_(std::move(tie_probabilities)) {
  if (thresholds_.empty()) throw ConfigError("threshold table is empty");
  if (tie_probs_.size() != thresholds_.size()) {
    throw ConfigError("threshold table: tie probabilities and thresholds differ in length");
  }
  if (info_.t_max != thresholds_.size()) throw ConfigError("threshold table: t_max does not match its length");
  for (double h : thresholds_) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("threshold table: thresholds must be positive");
  }
  for (double g : tie_probs_) {
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("threshold table: tie probabilities must lie in [0, 1]");
  }
}

void ThresholdTable::check_compatible(std::size_t bins, double lambda, std::size_t train_size) const {
  if (info_.bins != bins) {
    throw ConfigError("threshold table field 'bins' is " + std::to_string(info_.bins) +
                      " but the detector uses " + std::to_string(bins));
  }
  if (!same_double(info_.lambda, lambda)) {
    throw ConfigError("threshold table field 'lambda' is " + std::to_string(info_.lambda) +
                      " but the detector uses " + std::to_string(lambda));
  }
  if (info_.train_size != train_size) {
    throw ConfigError("threshold table field 'train_size' is " + std::to_string(info_.train_size) +
                      " but the histogram was built on " + std::to_string(train_size) + " points");
  }
}

void ThresholdTable::write(std::ostream& out) const {
  out << "cdm-thresholds " << kTableFormatVersion << '\n';
  out << "rng " << kRngName << '\n';
  out << "bins " << info_.bins << '\n';
  out << "lambda " << detail::hex_double(info_.lambda) << '\n';
  out << "arl0 " << detail::hex_double(info_.arl0) << '\n';
  out << "train_size " << info_.train_size << '\n';
  out << "t_max " << info_.t_max << '\n';
  out << "replicates " << info_.replicates << '\n';
  out << "seed " << info_.seed << '\n';
  out << "survivor_floor " << info_.survivor_floor << '\n';
  out << "tail constant\n";
  for (std::size_t t = 0; t < thresholds_.size(); ++t) {
    out << "h " << t + 1 << ' ' << detail::hex_double(thresholds_[t]) << ' '
        << detail::hex_double(tie_probs_[t]) << '\n';
  }
  out << "end\n";
}

ThresholdTable ThresholdTable::read(std::istream& in) {
  constexpr std::string_view ctx = "threshold table";
  auto header = detail::read_fields(in, ctx);
  if (header.size() != 2 || header[0] != "cdm-thresholds") throw ParseError("not a threshold table");
  if (detail::parse_u64(header[1], "format_version") != kTableFormatVersion) {
    throw ParseError("unsupported threshold table format_version " + header[1]);
  }
  if (detail::expect_key(in, "rng", ctx) != kRngName) throw ParseError("threshold table: unknown rng");
  ThresholdTableInfo info;
  info.bins = detail::parse_u64(detail::expect_key(in, "bins", ctx), "bins");
  info.lambda = detail::parse_double(detail::expect_key(in, "lambda", ctx), "lambda");
  info.arl0 = detail::parse_double(detail::expect_key(in, "arl0", ctx), "arl0");
  info.train_size = detail::parse_u64(detail::expect_key(in, "train_size", ctx), "train_size");
  info.t_max = detail::parse_u64(detail::expect_key(in, "t_max", ctx), "t_max");
  info.replicates = detail::parse_u64(detail::expect_key(in, "replicates", ctx), "replicates");
  info.seed = detail::parse_u64(detail::expect_key(in, "seed", ctx), "seed");
  info.survivor_floor = detail::parse_u64(detail::expect_key(in, "survivor_floor", ctx), "survivor_floor");
  if (detail::expect_key(in, "tail", ctx) != "constant") throw ParseError("threshold table: unknown tail rule");
  if (info.t_max == 0 || info.t_max > 100'000'000) throw ParseError("threshold table: implausible t_max");

  std::vector<double> h;
  std::vector<double> gamma;
  h.reserve(info.t_max);
  gamma.reserve(info.t_max);
  for (std::size_t t = 1; t <= info.t_max; ++t) {
    auto f = detail::read_fields(in, ctx);
    if (f.size() != 4 || f[0] != "h" || detail::parse_u64(f[1], "t") != t) {
      throw ParseError("threshold table: malformed row for t = " + std::to_string(t));
    }
    h.push_back(detail::parse_double(f[2], "h"));
    gamma.push_back(detail::parse_double(f[3], "tie probability"));
  }
  auto end = detail::read_fields(in, ctx);
  if (end.size() != 1 || end[0] != "end") throw ParseError("threshold table: missing 'end'");
  try {
    return ThresholdTable(info, std::move(h), std::move(gamma));
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
}

void ThresholdTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write(out);
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ThresholdTable ThresholdTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open threshold table '" + path.string() + "'");
  try {
    return read(in);
  } catch (const ParseError& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// QT-EWMA calibration

QtEwmaDetector make_surrogate_detector(std::size_t train_size, std::size_t bins, double lambda,
                                       Rng& rng) {
  Matrix training(train_size, 1);
  for (std::size_t i = 0; i < train_size; ++i) training(i, 0) = rng.uniform();
  auto hist = std::make_shared<const QuantTreeHistogram>(
      QuantTreeHistogram::build(training, uniform_probabilities(bins), rng.next()));
  return QtEwmaDetector(std::move(hist), lambda);
}

std::vector<double> simulate_stationary_trajectory(std::size_t train_size, std::size_t bins,
                                                   double lambda, std::size_t horizon,
                                                   std::uint64_t seed) {
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  Rng rng(seed);
  auto det = make_surrogate_detector(train_size, bins, lambda, rng);
  std::vector<double> out;
  out.reserve(horizon);
  double x = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    x = rng.uniform();
    out.push_back(det.observe_bin(det.histogram().locate_bin_unchecked({&x, 1})));
  }
  return out;
}

namespace {

struct NullReplicate {
  Rng rng;
  QtEwmaDetector detector;
};

std::vector<std::optional<NullReplicate>> make_null_replicates(std::size_t count, std::size_t train_size,
                                                               std::size_t bins, double lambda,
                                                               std::uint64_t seed) {
  std::vector<std::optional<NullReplicate>> reps(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    auto det = make_surrogate_detector(train_size, bins, lambda, rng);
    reps[i].emplace(NullReplicate{rng, std::move(det)});
  });
  return reps;
}

void advance(NullReplicate& rep) {
  double x = rep.rng.uniform();
  rep.detector.observe_bin(rep.detector.histogram().locate_bin_unchecked({&x, 1}));
}

void validate(const CalibrationOptions& o) {
  validate_probabilities(uniform_probabilities(o.bins));
  if (o.train_size < o.bins) throw ConfigError("calibration train_size must be at least bins");
  if (!(o.lambda > 0.0 && o.lambda < 1.0)) throw ConfigError("calibration lambda must lie in (0, 1)");
  if (!(o.arl0 >= 2.0) || !std::isfinite(o.arl0)) throw ConfigError("calibration arl0 must be at least 2");
  if (o.replicates < 10'000) throw ConfigError("calibration needs at least 10000 replicates");
  if (static_cast<double>(o.t_max) < 5.0 / o.lambda) {
    throw ConfigError("calibration t_max must be at least 5 / lambda = " + std::to_string(5.0 / o.lambda));
  }
  if (o.survivor_floor == 0) throw ConfigError("calibration survivor_floor must be positive");
}

}  // namespace

ThresholdTable calibrate_thresholds(const CalibrationOptions& options) {
  validate(options);
  const double alpha = 1.0 / options.arl0;
  auto reps = make_null_replicates(options.replicates, options.train_size, options.bins,
                                   options.lambda, options.seed);
  std::vector<std::size_t> alive(options.replicates);
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;

  std::vector<double> thresholds;
  std::vector<double> tie_probs;
  std::vector<double> values;
  for (std::size_t t = 1; t <= options.t_max; ++t) {
    const std::size_t n = alive.size();
    if (n < options.survivor_floor) {
      throw CalibrationError("only " + std::to_string(n) + " trajectories survive at t = " +
                             std::to_string(t) + " (floor " + std::to_string(options.survivor_floor) +
                             "); increase replicates or reduce t_max");
    }
    parallel_for(n, [&](std::size_t j) { advance(*reps[alive[j]]); });

    values.resize(n);
    for (std::size_t j = 0; j < n; ++j) values[j] = reps[alive[j]]->detector.statistic();
    // Nearest rank: the ceil((1 - alpha) n)-th smallest value.
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    const double h = values[rank - 1];
    const double margin = kTieTolerance * std::abs(h);
    std::size_t above = 0;
    std::size_t ties = 0;
    for (double v : values) {
      if (v > h + margin) {
        ++above;
      } else if (v >= h - margin) {
        ++ties;
      }
    }
    const double wanted = alpha * static_cast<double>(n);
    const double gamma =
        std::clamp((wanted - static_cast<double>(above)) / static_cast<double>(ties), 0.0, 1.0);
    thresholds.push_back(h);
    tie_probs.push_back(gamma);

    std::erase_if(alive, [&](std::size_t i) { return reps[i]->detector.exceeds(h, gamma); });
  }

  ThresholdTableInfo info{options.bins,     options.lambda,     options.arl0,
                          options.train_size, options.t_max,    options.replicates,
                          options.seed,     options.survivor_floor};
  return ThresholdTable(info, std::move(thresholds), std::move(tie_probs));
}

ExceedanceReplay replay_exceedance(const ThresholdTable& table, std::size_t replicates,
                                   std::size_t steps, std::uint64_t seed) {
  const auto& info = table.info();
  auto reps = make_null_replicates(replicates, info.train_size, info.bins, info.lambda, seed);
  ExceedanceReplay out;
  std::vector<std::size_t> alive(replicates);
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  for (std::size_t t = 1; t <= steps; ++t) {
    parallel_for(alive.size(), [&](std::size_t j) { advance(*reps[alive[j]]); });
    out.survivors.push_back(alive.size());
    const double h = table.threshold(t);
    const double gamma = table.tie_probability(t);
    const std::size_t before = alive.size();
    std::erase_if(alive, [&](std::size_t i) { return reps[i]->detector.exceeds(h, gamma); });
    out.exceedances.push_back(before - alive.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// ECDD control limit

double simulate_ecdd_run_length(double p0, double r, double limit, std::size_t replicates,
                                std::size_t horizon, std::uint64_t seed) {
  if (replicates == 0) throw ConfigError("ECDD simulation needs at least one replicate");
  std::vector<double> lengths(replicates);
  parallel_for(replicates, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    EcddDetector det(p0, r, limit);
    std::size_t t = 0;
    while (t < horizon) {
      ++t;
      if (det.update(rng.bernoulli(p0)).detected) break;
    }
    lengths[i] = static_cast<double>(t);
  });
  double sum = 0.0;
  for (double v : lengths) sum += v;
  return sum / static_cast<double>(replicates);
}

double calibrate_ecdd_limit(const EcddCalibrationOptions& o) {
  if (!(o.p0 > 0.0 && o.p0 < 1.0)) throw ConfigError("ECDD calibration needs 0 < p0 < 1");
  if (!(o.r > 0.0 && o.r < 1.0)) throw ConfigError("ECDD calibration needs 0 < r < 1");
  if (!(o.arl0 >= 2.0)) throw ConfigError("ECDD calibration needs arl0 >= 2");
  if (o.replicates == 0) throw ConfigError("ECDD calibration needs replicates > 0");
  const auto horizon = static_cast<std::size_t>(std::ceil(o.horizon_factor * o.arl0));
  auto arl = [&](double limit) {
    return simulate_ecdd_run_length(o.p0, o.r, limit, o.replicates, horizon, o.seed);
  };
  auto close_enough = [&](double value) { return std::abs(value / o.arl0 - 1.0) <= o.tolerance; };

  double lo = 0.0;
  double lo_arl = arl(lo);
  if (close_enough(lo_arl)) return lo;
  if (lo_arl > o.arl0) {
    throw CalibrationError("ECDD: even L = 0 gives a run length above the target");
  }
  double hi = 1.0;
  double hi_arl = arl(hi);
  std::size_t iterations = 0;
  while (hi_arl < o.arl0) {
    if (close_enough(hi_arl)) return hi;
    if (++iterations > o.max_iterations || hi > 1e3) {
      throw CalibrationError("ECDD: could not bracket the target run length");
    }
    lo = hi;
    hi *= 2.0;
    hi_arl = arl(hi);
  }
  if (close_enough(hi_arl)) return hi;
  for (; iterations < o.max_iterations; ++iterations) {
    const double mid = 0.5 * (lo + hi);
    const double mid_arl = arl(mid);
    if (close_enough(mid_arl)) return mid;
    if (mid_arl < o.arl0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw CalibrationError("ECDD: bisection did not reach the target run length within " +
                         std::to_string(o.max_iterations) + " iterations");
}

}  // namespace cdm
