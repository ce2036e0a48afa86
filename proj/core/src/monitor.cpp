#include "cdm/monitor.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cdm/errors.hpp"

namespace cdm {

CdmMonitor CdmMonitor::fit(const LabeledSet& training, std::shared_ptr<const ThresholdTable> thresholds,
                           const CdmOptions& options) {
  const Label inferred = training.num_classes();  // throws on labels < 1
  const Label classes = options.num_classes.value_or(inferred);
  if (classes < 1) throw ConfigError("CDM needs at least one class");
  if (inferred > classes) {
    throw InputError("training label " + std::to_string(inferred) + " is outside 1.." +
                     std::to_string(classes));
  }
  const auto probs = options.target_probs.empty() ? uniform_probabilities(options.bins) : options.target_probs;
  if (probs.size() != options.bins) throw ConfigError("target_probs length differs from bins");

  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (Label y : training.labels) ++counts[static_cast<std::size_t>(y - 1)];
  for (Label m = 1; m <= classes; ++m) {
    const std::size_t c = counts[static_cast<std::size_t>(m - 1)];
    if (c < options.bins) {
      throw ConfigError("class " + std::to_string(m) + " has " + std::to_string(c) +
                        " training samples, at least " + std::to_string(options.bins) + " are needed");
    }
  }

  std::vector<QtEwmaDetector> detectors;
  detectors.reserve(static_cast<std::size_t>(classes));
  for (Label m = 1; m <= classes; ++m) {
    auto hist = std::make_shared<const QuantTreeHistogram>(
        QuantTreeHistogram::build(training.class_features(m), probs, options.seed + static_cast<std::uint64_t>(m)));
    detectors.emplace_back(std::move(hist), options.lambda, thresholds);
  }
  return CdmMonitor(std::move(detectors), options.label_policy);
}

CdmMonitor::CdmMonitor(std::vector<QtEwmaDetector> detectors, LabelPolicy policy)
    : detectors_(std::move(detectors)), policy_(policy) {
  if (detectors_.empty()) throw ConfigError("CDM needs at least one class");
  const ThresholdTable* table = detectors_.front().thresholds();
  for (const auto& d : detectors_) {
    if (d.thresholds() != table) throw ConfigError("all class detectors must share one threshold table");
  }
}

Decision CdmMonitor::process(std::span<const double> x, Label y) {
  if (decision_.drift) return decision_;
  if (y < 1 || y > num_classes()) {
    if (policy_ == LabelPolicy::kStrict) {
      throw InputError("label " + std::to_string(y) + " is outside 1.." + std::to_string(num_classes()));
    }
    ++global_t_;
    ++skipped_;
    return decision_;
  }
  auto& det = detectors_[static_cast<std::size_t>(y - 1)];
  const auto step = det.update(x);  // validates x before any state change
  ++global_t_;
  if (step.detected) {
    decision_.drift = true;
    decision_.t_star = global_t_;
    decision_.m_star = y;
  }
  return decision_;
}

Decision CdmMonitor::process_unlabeled(std::span<const double> /*x*/) {
  if (decision_.drift) return decision_;
  ++global_t_;
  return decision_;
}

std::size_t CdmMonitor::labeled_samples() const noexcept {
  std::size_t total = 0;
  for (const auto& d : detectors_) total += d.samples();
  return total;
}

DetectionReport CdmMonitor::report(std::string method) const {
  DetectionReport r;
  r.method = std::move(method);
  r.detected = decision_.drift;
  r.t_star = decision_.t_star;
  r.m_star = decision_.m_star;
  r.samples_processed = global_t_;
  r.labeled_samples = labeled_samples();
  r.skipped_samples = skipped_;
  for (const auto& d : detectors_) {
    r.per_class_samples.push_back(d.samples());
    r.final_statistics.push_back(d.statistic());
    r.final_thresholds.push_back(d.current_threshold());
  }
  return r;
}

}  // namespace cdm
