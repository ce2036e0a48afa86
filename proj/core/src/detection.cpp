#include "cdm/detection.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace cdm {

namespace {

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? ";" : "") << values[i];
  return out.str();
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string to_json(const DetectionReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["detected"] = report.detected;
  j["t_star"] = report.detected ? nlohmann::json(report.t_star) : nlohmann::json(nullptr);
  if (report.m_star) j["m_star"] = *report.m_star;
  j["samples_processed"] = report.samples_processed;
  j["labeled_samples"] = report.labeled_samples;
  j["skipped_samples"] = report.skipped_samples;
  if (!report.per_class_samples.empty()) j["per_class_samples"] = report.per_class_samples;
  auto stats = nlohmann::json::array();
  for (double v : report.final_statistics) stats.push_back(finite_or_null(v));
  j["final_statistics"] = stats;
  auto thresholds = nlohmann::json::array();
  for (double v : report.final_thresholds) thresholds.push_back(finite_or_null(v));
  j["final_thresholds"] = thresholds;
  return j.dump();
}

std::string csv_header(const DetectionReport&) {
  return "method,detected,t_star,m_star,samples_processed,labeled_samples,skipped_samples,"
         "per_class_samples,final_statistics,final_thresholds";
}

std::string to_csv_row(const DetectionReport& r) {
  std::ostringstream out;
  out << r.method << ',' << (r.detected ? 1 : 0) << ',';
  if (r.detected) out << r.t_star;
  out << ',';
  if (r.m_star) out << *r.m_star;
  out << ',' << r.samples_processed << ',' << r.labeled_samples << ',' << r.skipped_samples << ','
      << join(r.per_class_samples) << ',' << join(r.final_statistics) << ','
      << join(r.final_thresholds);
  return out.str();
}

}  // namespace cdm
