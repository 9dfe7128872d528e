#pragma once

#include <iosfwd>

namespace poolbench {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitGradcheckFailed = 2,
  kExitDiverged = 3,
};

// poolbench {sweep | gradcheck | params-report | lr-sweep} [flags]
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace poolbench
