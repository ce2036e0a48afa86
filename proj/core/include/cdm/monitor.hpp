#ifndef CDM_MONITOR_HPP_
#define CDM_MONITOR_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cdm/detection.hpp"
#include "cdm/labeled.hpp"
#include "cdm/qt_ewma.hpp"
#include "cdm/threshold_table.hpp"

namespace cdm {

/// What to do with labels outside 1..M during monitoring.
enum class LabelPolicy {
  kStrict,   // InputError
  kLenient,  // skip the sample and count it
};

struct CdmOptions {
  std::size_t bins = kDefaultBins;
  double lambda = kDefaultLambda;
  std::uint64_t seed = 0;
  LabelPolicy label_policy = LabelPolicy::kStrict;
  /// Class count M; inferred as the largest training label when empty.
  std::optional<Label> num_classes;
  /// Target bin probabilities; uniform when empty.
  std::vector<double> target_probs;
};

/// Class Distribution Monitoring: one QT-EWMA detector per class, each fed
/// only the samples carrying its label. The detector of class m compares its
/// statistic with h_{t_m}, where t_m counts class-m samples, and the first
/// alarm is reported together with the class that raised it.
class CdmMonitor {
 public:
  /// Splits the training set by label and builds one QuantTree per class
  /// with seed options.seed + m. Throws ConfigError naming the class when a
  /// class has fewer than `bins` samples (or none), InputError for labels
  /// outside 1..M.
  static CdmMonitor fit(const LabeledSet& training, std::shared_ptr<const ThresholdTable> thresholds,
                        const CdmOptions& options = {});

  /// Monitor over already built per-class detectors; detectors[m - 1] serves
  /// class m.
  CdmMonitor(std::vector<QtEwmaDetector> detectors, LabelPolicy policy = LabelPolicy::kStrict);

  /// Routes x to the detector of class y. After an alarm the monitor is
  /// frozen and keeps returning the same decision.
  Decision process(std::span<const double> x, Label y);
  /// Unlabeled samples advance global time only.
  Decision process_unlabeled(std::span<const double> x);
  Decision process(const Sample& s) {
    return s.label ? process(s.x, *s.label) : process_unlabeled(s.x);
  }

  Label num_classes() const noexcept { return static_cast<Label>(detectors_.size()); }
  const QtEwmaDetector& detector(Label m) const { return detectors_.at(static_cast<std::size_t>(m - 1)); }
  std::size_t samples_seen() const noexcept { return global_t_; }
  std::size_t class_samples(Label m) const { return detector(m).samples(); }
  std::size_t labeled_samples() const noexcept;
  std::size_t skipped_samples() const noexcept { return skipped_; }
  bool detected() const noexcept { return decision_.drift; }
  const Decision& decision() const noexcept { return decision_; }

  DetectionReport report(std::string method = "cdm") const;

 private:
  std::vector<QtEwmaDetector> detectors_;
  LabelPolicy policy_;
  std::size_t global_t_ = 0;
  std::size_t skipped_ = 0;
  Decision decision_;
};

}  // namespace cdm

#endif  // CDM_MONITOR_HPP_
