#ifndef CDM_TOOLS_CLI_HPP_
#define CDM_TOOLS_CLI_HPP_

#include <iosfwd>

namespace cdm::cli {

/// Exit codes of the `cdm` tool.
inline constexpr int kOk = 0;
inline constexpr int kConfigFailure = 1;  // bad flags, configs, tables, calibration
inline constexpr int kIoFailure = 2;      // unreadable files, malformed CSV or data

/// Runs the tool with the given argument vector (argv[0] is the program).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdm::cli

#endif  // CDM_TOOLS_CLI_HPP_
