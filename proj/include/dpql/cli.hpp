#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dpql::cli {

/// Process exit codes, one per error class.
enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,         // bad flags or configuration
  kInputError = 3,         // unreadable or malformed input files
  kNumericalError = 4,     // integration failure or invalid numerical domain
  kConsistencyError = 5,   // an internal consistency check did not hold
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one command line (argv[0] is the program name). Diagnostics go to `err`,
/// short summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dpql::cli
