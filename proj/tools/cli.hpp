#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace odx::cli {

enum ExitCode : int {
  kOk = 0,
  kRejected = 1,
  kUsage = 2,
  kRuntime = 3,
};

// Parses and runs one command line. argv[0] is the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace odx::cli
