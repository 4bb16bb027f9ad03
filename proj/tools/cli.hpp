#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bpcal::cli {

enum ExitCode { kOk = 0, kIoError = 1, kUsage = 2, kNumerical = 3 };

/// Runs `bpcal <args...>` (args excludes the program name). Output goes to
/// `out` and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bpcal::cli
