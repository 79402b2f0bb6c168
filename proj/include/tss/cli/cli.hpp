#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tss::cli {

enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericError = 3,
};

// Runs one `tss` command line (args exclude the program name). Results and
// the resolved configuration go to `out`, progress and errors to `err`.
// Errors are reported as a single line "tss-error: <kind>: <message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tss::cli
