#include "cdm/qt_ewma.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "cdm/errors.hpp"

namespace cdm {

QtEwmaDetector::QtEwmaDetector(std::shared_ptr<const QuantTreeHistogram> hist, double lambda,
                               std::shared_ptr<const ThresholdTable> thresholds)
    : hist_(std::move(hist)), table_(std::move(thresholds)), lambda_(lambda) {
  if (!hist_) throw ConfigError("QT-EWMA detector needs a histogram");
  if (!(lambda_ > 0.0 && lambda_ < 1.0)) {
    throw ConfigError("lambda must lie in (0, 1), got " + std::to_string(lambda_));
  }
  if (table_) table_->check_compatible(hist_->bins(), lambda_, hist_->train_size());
  z_ = hist_->target_probs();
  tie_rng_.reseed(tie_breaking_seed(hist_->seed()));
}

double QtEwmaDetector::observe_bin(std::size_t bin) noexcept {
  const auto& pi = hist_->target_probs();
  const double keep = 1.0 - lambda_;
  double stat = 0.0;
  for (std::size_t k = 0; k < z_.size(); ++k) {
    z_[k] = keep * z_[k] + (k == bin ? lambda_ : 0.0);
    // A bin that stays empty decays into subnormals, which are slow; at this
    // size it no longer moves the statistic.
    if (z_[k] < 1e-150) z_[k] = 0.0;
    const double dev = z_[k] - pi[k];
    stat += dev * dev / pi[k];
  }
  ++t_;
  statistic_ = stat;
  return stat;
}

bool QtEwmaDetector::exceeds(double h, double tie_prob) noexcept {
  const double margin = kTieTolerance * std::abs(h);
  if (statistic_ > h + margin) return true;
  if (statistic_ < h - margin) return false;
  return tie_prob > 0.0 && tie_rng_.uniform() < tie_prob;
}

QtEwmaDetector::Step QtEwmaDetector::update_bin(std::size_t bin) {
  if (bin >= z_.size()) throw InputError("bin index out of range");
  if (detected()) return {statistic_, true};
  observe_bin(bin);
  bool alarm = false;
  if (table_ && exceeds(table_->threshold(t_), table_->tie_probability(t_))) {
    alarm = true;
    detection_time_ = t_;
  }
  if (trace_) {
    *trace_ << t_ << ',' << bin << ',' << statistic_ << ',' << current_threshold() << ','
            << (alarm ? 1 : 0) << '\n';
  }
  return {statistic_, alarm};
}

QtEwmaDetector::Step QtEwmaDetector::update(std::span<const double> x) {
  const std::size_t bin = hist_->locate_bin(x);
  return update_bin(bin);
}

double QtEwmaDetector::current_threshold() const noexcept {
  if (!table_ || t_ == 0) return std::numeric_limits<double>::infinity();
  return table_->threshold(t_);
}

void QtEwmaDetector::set_trace(std::ostream* out) {
  trace_ = out;
  if (trace_) {
    trace_->precision(17);
    *trace_ << "t,bin,statistic,threshold,detected\n";
  }
}

}  // namespace cdm
