#pragma once

#include <ostream>

namespace roundbuy::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,     // bad flags, missing input files, invalid configuration
  kData = 2,      // input data failed parsing or validation
  kInternal = 3,  // an internal check failed (e.g. gradcheck over tolerance)
};

// Runs one command. Reports go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace roundbuy::cli
