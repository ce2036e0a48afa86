#ifndef CDM_ECDD_HPP_
#define CDM_ECDD_HPP_

#include <cstddef>
#include <memory>
#include <optional>
#include <span>

#include "cdm/classifier.hpp"
#include "cdm/detection.hpp"
#include "cdm/labeled.hpp"

namespace cdm {

inline constexpr double kDefaultEcddWeight = 0.2;

/// Standard deviation of the EWMA error statistic after t samples:
/// sqrt(p (1 - p) r / (2 - r) (1 - (1 - r)^(2t))).
double ecdd_sigma(double p_hat, double r, std::size_t t) noexcept;

/// EWMA chart over a 0/1 error stream (ECDD).
///
/// U_t = (1 - r) U_{t-1} + r e_t with U_0 = p0. The error-rate estimate
/// p_hat is the running mean of the errors, seeded with p0 as its first
/// observation. An alarm is raised when U_t > p_hat_t + L sigma_t; the rule
/// is one-sided, so only error increases are detected.
class EcddDetector {
 public:
  struct Step {
    double statistic = 0.0;
    bool detected = false;
  };

  /// Throws ConfigError unless 0 <= p0 <= 1, 0 < r < 1 and L is finite.
  EcddDetector(double p0, double r = kDefaultEcddWeight, double limit = 3.0);

  /// Folds in one error indicator. Frozen after the first alarm.
  Step update(bool error) noexcept;

  double statistic() const noexcept { return u_; }
  double p_hat() const noexcept { return p_hat_; }
  double p0() const noexcept { return p0_; }
  double r() const noexcept { return r_; }
  double limit() const noexcept { return limit_; }
  std::size_t samples() const noexcept { return n_; }
  double sigma() const noexcept { return ecdd_sigma(p_hat_, r_, n_); }
  /// Current alarm bound p_hat + L sigma.
  double bound() const noexcept { return p_hat_ + limit_ * sigma(); }
  bool detected() const noexcept { return detection_time_.has_value(); }
  std::optional<std::size_t> detection_time() const noexcept { return detection_time_; }

 private:
  double p0_;
  double r_;
  double limit_;
  double u_;
  double p_hat_;
  std::size_t n_ = 0;
  std::optional<std::size_t> detection_time_;
};

/// ECDD fed by a fixed classifier: e_t = 1(predict(x_t) != y_t). Unlabeled
/// samples advance global time only. The classifier is never updated.
class EcddMonitor {
 public:
  EcddMonitor(std::shared_ptr<const Classifier> classifier, EcddDetector detector);

  Decision process(std::span<const double> x, std::optional<Label> y);
  Decision process(const Sample& s) { return process(s.x, s.label); }

  const EcddDetector& detector() const noexcept { return detector_; }
  std::size_t samples_seen() const noexcept { return global_t_; }
  bool detected() const noexcept { return decision_.drift; }
  DetectionReport report() const;

 private:
  std::shared_ptr<const Classifier> classifier_;
  EcddDetector detector_;
  std::size_t global_t_ = 0;
  std::size_t labeled_ = 0;
  Decision decision_;
};

}  // namespace cdm

#endif  // CDM_ECDD_HPP_
