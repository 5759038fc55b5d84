#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace canon_lti::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitSchema = 2,
  kExitNumerical = 3,
  kExitNotConverged = 4,
};

/// Full command line, program name first. Never throws; errors are reported
/// on err and mapped to an exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace canon_lti::cli
