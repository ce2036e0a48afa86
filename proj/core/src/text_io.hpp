// Helpers shared by the versioned text formats (histograms, threshold
// tables). Not installed.
#ifndef CDM_SRC_TEXT_IO_HPP_
#define CDM_SRC_TEXT_IO_HPP_

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cdm/errors.hpp"

namespace cdm::detail {

/// Exact text form of a double ("%a").
inline std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& token, std::string_view what) {
  if (token.empty()) throw ParseError("empty value for " + std::string(what));
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || errno == ERANGE) {
    throw ParseError("invalid number '" + token + "' for " + std::string(what));
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& token, std::string_view what) {
  if (token.empty() || token[0] == '-') {
    throw ParseError("invalid unsigned integer '" + token + "' for " + std::string(what));
  }
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size() || errno == ERANGE) {
    throw ParseError("invalid unsigned integer '" + token + "' for " + std::string(what));
  }
  return v;
}

/// Reads one non-empty line and splits it on whitespace. Throws ParseError
/// on end of input.
inline std::vector<std::string> read_fields(std::istream& in, std::string_view context) {
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(std::move(f));
    if (!fields.empty()) return fields;
  }
  throw ParseError("unexpected end of " + std::string(context));
}

/// Reads a "key value" line and returns the value token.
inline std::string expect_key(std::istream& in, std::string_view key, std::string_view context) {
  auto fields = read_fields(in, context);
  if (fields.size() != 2 || fields[0] != key) {
    throw ParseError(std::string(context) + ": expected '" + std::string(key) + " <value>'");
  }
  return fields[1];
}

}  // namespace cdm::detail

#endif  // CDM_SRC_TEXT_IO_HPP_
