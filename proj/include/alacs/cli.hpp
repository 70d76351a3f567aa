#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace alacs {

/// Process exit codes of the `alacs` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,          ///< bad command line or config
  kExitBadImage = 2,       ///< unreadable or unsupported image
  kExitEmptyLine = 3,      ///< no laser line found
  kExitLocalization = 4,   ///< no scan stop produced a usable line
  kExitGateViolated = 5,   ///< evaluate: an acceptance gate failed
  kExitIo = 6,             ///< filesystem error
};

/// Runs the CLI on `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace alacs
