#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace abc {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      // bad flags or config
  kExitData = 2,       // unreadable / malformed / mismatched data or checkpoint
  kExitNumerical = 3,  // non-finite loss or failed gradient check
};

/// Entry point behind the `abc` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace abc
