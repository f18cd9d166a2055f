#pragma once

#include <iosfwd>

namespace krdiv::cli {

/// Exit codes of the command-line front end.
enum Exit : int { kPass = 0, kCheckFailed = 1, kUsage = 2 };

/// Parses arguments and runs one command. Reports go to `out` unless --out is
/// given; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace krdiv::cli
