#pragma once

#include <iosfwd>

namespace dertariff {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitInfeasible = 3,
  kExitIo = 4,
};

/// Entry point of the `dertariff` tool; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dertariff
