#ifndef CDM_DETECTION_HPP_
#define CDM_DETECTION_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cdm/labeled.hpp"

namespace cdm {

/// Outcome of feeding one sample to a monitor.
struct Decision {
  bool drift = false;
  std::size_t t_star = 0;          // global time of the alarm (1-based)
  std::optional<Label> m_star;     // class that raised it, when known

  friend bool operator==(const Decision&, const Decision&) = default;
};

/// Summary of a monitoring run, emitted by the CLI as JSON or CSV.
struct DetectionReport {
  std::string method;
  bool detected = false;
  std::size_t t_star = 0;
  std::optional<Label> m_star;
  std::size_t samples_processed = 0;
  std::size_t labeled_samples = 0;
  std::size_t skipped_samples = 0;
  std::vector<std::size_t> per_class_samples;  // t_m, empty for ECDD
  std::vector<double> final_statistics;         // T^m per class, or U for ECDD
  std::vector<double> final_thresholds;         // h_{t_m} per class, or the ECDD bound
};

std::string to_json(const DetectionReport& report);
std::string csv_header(const DetectionReport&);
std::string to_csv_row(const DetectionReport& report);

}  // namespace cdm

#endif  // CDM_DETECTION_HPP_
