#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace roadrank::cli {

/// Exit codes, one per failure category.
enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kMissingInput = 3,
  kInvalidInput = 4,
  kNumerical = 5,
};

/// Runs one command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace roadrank::cli
