// Command-line front end: `epoal trace | bench | certify`.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace epoal::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kDivergence = 2,
  kNotCertified = 3,
  kUsage = 64,
  kDataError = 65,
};

/// Parses `args` (without the program name) and runs the selected command.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace epoal::cli
