#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace diverge::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,  ///< argument, parse or validation error
  kNotConverged = 3,
  kIoFailure = 4,
};

/// Runs one subcommand (`eq`, `calibrate`, `social`, `sweep`). `args`
/// excludes the program name. Results go to `out`, diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace diverge::cli
