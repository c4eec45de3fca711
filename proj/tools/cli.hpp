#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fashionrec::cli {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kIoOrConfig = 2 };

// Runs one command line (args excludes the program name). Summaries go to out,
// usage and diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fashionrec::cli
