#pragma once

#include <ostream>

namespace mzd {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitInfeasible = 3,
  kExitLockFailure = 4,
};

/// mzdetect design|simulate|experiment <name> [--config PATH] [--seed N]
/// [--out DIR] [--threads N]. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mzd
