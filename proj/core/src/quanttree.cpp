#include "cdm/quanttree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>

#include "cdm/random.hpp"
#include "text_io.hpp"

namespace cdm {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kProbabilityTolerance = 1e-9;

// Target count for the next bin, given `remaining` points and `bins_left`
// bins still to fill (including this one).
std::size_t next_count(std::size_t remaining, std::size_t bins_left, double prob, double tail) {
  const auto raw = std::lround(static_cast<double>(remaining) * prob / tail);
  const auto hi = static_cast<long>(remaining - (bins_left - 1));
  return static_cast<std::size_t>(std::clamp(raw, 1L, std::max(1L, hi)));
}

std::vector<double> suffix_sums(std::span<const double> probs) {
  std::vector<double> tail(probs.size());
  double acc = 0.0;
  for (std::size_t k = probs.size(); k-- > 0;) {
    acc += probs[k];
    tail[k] = acc;
  }
  return tail;
}

}  // namespace

std::vector<double> uniform_probabilities(std::size_t bins) {
  if (bins == 0) throw ConfigError("number of bins must be positive");
  return std::vector<double>(bins, 1.0 / static_cast<double>(bins));
}

void validate_probabilities(std::span<const double> probs) {
  if (probs.size() < 2) throw ConfigError("a histogram needs at least 2 bins");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ConfigError("target probabilities must be positive and finite");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    throw ConfigError("target probabilities must sum to 1 (sum = " + std::to_string(sum) + ")");
  }
}

std::vector<std::size_t> allocate_counts(std::size_t total, std::span<const double> probs) {
  validate_probabilities(probs);
  const std::size_t bins = probs.size();
  if (total < bins) throw ConfigError("training size must be at least the number of bins");
  const auto tail = suffix_sums(probs);
  std::vector<std::size_t> counts(bins);
  std::size_t remaining = total;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    counts[k] = next_count(remaining, bins - k, probs[k], tail[k]);
    remaining -= counts[k];
  }
  counts.back() = remaining;
  return counts;
}

QuantTreeHistogram QuantTreeHistogram::build(const Matrix& training,
                                             std::span<const double> target_probs,
                                             std::uint64_t seed) {
  validate_probabilities(target_probs);
  const std::size_t n = training.rows();
  const std::size_t d = training.cols();
  const std::size_t bins = target_probs.size();
  if (d == 0) throw ConfigError("training data must have at least one column");
  if (n < bins) {
    throw ConfigError("training size " + std::to_string(n) + " is smaller than the number of bins " +
                      std::to_string(bins));
  }
  for (double v : training.data()) {
    if (!std::isfinite(v)) throw InputError("training data contains non-finite values");
  }

  QuantTreeHistogram hist;
  hist.dim_ = d;
  hist.train_size_ = n;
  hist.seed_ = seed;
  hist.probs_.assign(target_probs.begin(), target_probs.end());
  hist.splits_.reserve(bins - 1);

  const auto tail = suffix_sums(target_probs);
  Rng rng(seed);
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::pair<double, std::size_t>> keyed;

  for (std::size_t k = 0; k + 1 < bins; ++k) {
    const std::size_t left = remaining.size();
    if (left < 2) {
      throw InputError("training data has too many duplicate values to fill " +
                       std::to_string(bins) + " bins");
    }
    const std::size_t dim = static_cast<std::size_t>(rng.below(d));
    const auto direction = (rng.next() >> 63) != 0 ? SplitDirection::kUpper : SplitDirection::kLower;
    const std::size_t count = std::min(next_count(left, bins - k, target_probs[k], tail[k]), left - 1);

    // Order statistics under (value, row index), which is a strict total
    // order, so selection gives the same pair as a full sort.
    keyed.clear();
    for (std::size_t i : remaining) keyed.emplace_back(training(i, dim), i);
    const std::size_t lo = direction == SplitDirection::kLower ? count - 1 : left - count - 1;
    const auto nth = keyed.begin() + static_cast<std::ptrdiff_t>(lo);
    std::nth_element(keyed.begin(), nth, keyed.end());
    const double below = nth->first;
    const double above = std::min_element(nth + 1, keyed.end())->first;
    const double threshold = std::midpoint(below, above);
    const Split split{dim, threshold, direction};
    hist.splits_.push_back(split);
    std::erase_if(remaining, [&](std::size_t i) { return split.contains(training.row(i)); });
  }
  return hist;
}

QuantTreeHistogram::QuantTreeHistogram(std::size_t dim, std::size_t train_size, std::uint64_t seed,
                                       std::vector<double> target_probs, std::vector<Split> splits)
    : dim_(dim),
      train_size_(train_size),
      seed_(seed),
      probs_(std::move(target_probs)),
      splits_(std::move(splits)) {
  validate_probabilities(probs_);
  if (dim_ == 0) throw ConfigError("histogram dimension must be positive");
  if (splits_.size() + 1 != probs_.size()) {
    throw ConfigError("a histogram with K bins needs exactly K-1 splits");
  }
  if (train_size_ < probs_.size()) throw ConfigError("training size smaller than the number of bins");
  for (const auto& s : splits_) {
    if (s.dim >= dim_) throw ConfigError("split dimension out of range");
    if (std::isnan(s.threshold)) throw ConfigError("split threshold is NaN");
  }
}

std::vector<std::size_t> QuantTreeHistogram::allocation() const {
  return allocate_counts(train_size_, probs_);
}

std::size_t QuantTreeHistogram::locate_bin(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw InputError("sample has " + std::to_string(x.size()) + " features, histogram expects " +
                     std::to_string(dim_));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("sample contains non-finite values");
  }
  return locate_bin_unchecked(x);
}

std::vector<std::size_t> QuantTreeHistogram::bin_counts(const Matrix& data) const {
  std::vector<std::size_t> counts(bins(), 0);
  if (data.rows() > 0 && data.cols() != dim_) {
    throw InputError("dataset has " + std::to_string(data.cols()) + " columns, histogram expects " +
                     std::to_string(dim_));
  }
  for (std::size_t i = 0; i < data.rows(); ++i) ++counts[locate_bin(data.row(i))];
  return counts;
}

void QuantTreeHistogram::write(std::ostream& out) const {
  out << "quanttree " << kFormatVersion << '\n';
  out << "rng " << kRngName << '\n';
  out << "dim " << dim_ << '\n';
  out << "bins " << probs_.size() << '\n';
  out << "train_size " << train_size_ << '\n';
  out << "seed " << seed_ << '\n';
  out << "probs";
  for (double p : probs_) out << ' ' << detail::hex_double(p);
  out << '\n';
  for (const auto& s : splits_) {
    out << "split " << s.dim << ' ' << (s.direction == SplitDirection::kLower ? "lower" : "upper")
        << ' ' << detail::hex_double(s.threshold) << '\n';
  }
  out << "end\n";
}

QuantTreeHistogram QuantTreeHistogram::read(std::istream& in) {
  constexpr std::string_view ctx = "quanttree record";
  auto header = detail::read_fields(in, ctx);
  if (header.size() != 2 || header[0] != "quanttree") throw ParseError("not a quanttree record");
  if (detail::parse_u64(header[1], "format_version") != kFormatVersion) {
    throw ParseError("unsupported quanttree format_version " + header[1]);
  }
  if (detail::expect_key(in, "rng", ctx) != kRngName) throw ParseError("quanttree record: unknown rng");
  const auto dim = detail::parse_u64(detail::expect_key(in, "dim", ctx), "dim");
  const auto bins = detail::parse_u64(detail::expect_key(in, "bins", ctx), "bins");
  const auto train_size = detail::parse_u64(detail::expect_key(in, "train_size", ctx), "train_size");
  const auto seed = detail::parse_u64(detail::expect_key(in, "seed", ctx), "seed");

  auto probs_line = detail::read_fields(in, ctx);
  if (probs_line.empty() || probs_line[0] != "probs" || probs_line.size() != bins + 1) {
    throw ParseError("quanttree record: expected " + std::to_string(bins) + " probabilities");
  }
  std::vector<double> probs;
  for (std::size_t k = 1; k < probs_line.size(); ++k) probs.push_back(detail::parse_double(probs_line[k], "probs"));

  std::vector<Split> splits;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    auto f = detail::read_fields(in, ctx);
    if (f.size() != 4 || f[0] != "split" || (f[2] != "lower" && f[2] != "upper")) {
      throw ParseError("quanttree record: malformed split line " + std::to_string(k));
    }
    splits.push_back({static_cast<std::size_t>(detail::parse_u64(f[1], "split dim")),
                      detail::parse_double(f[3], "split threshold"),
                      f[2] == "lower" ? SplitDirection::kLower : SplitDirection::kUpper});
  }
  auto end = detail::read_fields(in, ctx);
  if (end.size() != 1 || end[0] != "end") throw ParseError("quanttree record: missing 'end'");
  try {
    return QuantTreeHistogram(dim, train_size, seed, std::move(probs), std::move(splits));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("quanttree record: ") + e.what());
  }
}

}  // namespace cdm
