// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deapsim::cli {

/// Exit statuses of the command-line tool.
enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kParse = 3,
  kSimulation = 4,
  kIo = 5,
};

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deapsim::cli
