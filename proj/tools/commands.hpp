#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kNumericFailure = 3,
  kIoError = 4,
};

/// Parses `args` (without the program name) and dispatches to a subcommand.
/// All output goes to the given streams so tests can capture it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nlr::cli
