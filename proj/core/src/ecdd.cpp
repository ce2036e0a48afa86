#include "cdm/ecdd.hpp"

#include <cmath>
#include <string>

#include "cdm/errors.hpp"

namespace cdm {

double ecdd_sigma(double p_hat, double r, std::size_t t) noexcept {
  const double decay = std::pow(1.0 - r, 2.0 * static_cast<double>(t));
  const double var = p_hat * (1.0 - p_hat) * r / (2.0 - r) * (1.0 - decay);
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

EcddDetector::EcddDetector(double p0, double r, double limit)
    : p0_(p0), r_(r), limit_(limit), u_(p0), p_hat_(p0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ConfigError("ECDD p0 must lie in [0, 1]");
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("ECDD weight r must lie in (0, 1)");
  if (!std::isfinite(limit)) throw ConfigError("ECDD control limit must be finite");
}

EcddDetector::Step EcddDetector::update(bool error) noexcept {
  if (detected()) return {u_, true};
  const double e = error ? 1.0 : 0.0;
  ++n_;
  p_hat_ += (e - p_hat_) / static_cast<double>(n_ + 1);
  u_ = (1.0 - r_) * u_ + r_ * e;
  const bool alarm = u_ > p_hat_ + limit_ * sigma();
  if (alarm) detection_time_ = n_;
  return {u_, alarm};
}

EcddMonitor::EcddMonitor(std::shared_ptr<const Classifier> classifier, EcddDetector detector)
    : classifier_(std::move(classifier)), detector_(detector) {
  if (!classifier_) throw ConfigError("ECDD monitor needs a fitted classifier");
}

Decision EcddMonitor::process(std::span<const double> x, std::optional<Label> y) {
  if (decision_.drift) return decision_;
  ++global_t_;
  if (!y) return decision_;
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("sample contains non-finite values");
  }
  ++labeled_;
  const bool error = classifier_->predict(x) != *y;
  if (detector_.update(error).detected) {
    decision_.drift = true;
    decision_.t_star = global_t_;
  }
  return decision_;
}

DetectionReport EcddMonitor::report() const {
  DetectionReport r;
  r.method = "ecdd";
  r.detected = decision_.drift;
  r.t_star = decision_.t_star;
  r.samples_processed = global_t_;
  r.labeled_samples = labeled_;
  r.final_statistics = {detector_.statistic()};
  r.final_thresholds = {detector_.bound()};
  return r;
}

}  // namespace cdm
