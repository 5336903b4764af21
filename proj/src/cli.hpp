#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rht::cli {

/// Exit codes of the command-line tool.
inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;       // invalid input or configuration
inline constexpr int exit_usage = 2;       // command-line parse error
inline constexpr int exit_invariants = 3;  // a run or checkpoint failed an invariant check

/// Runs the tool with `args` (without the program name), writing normal
/// output to `out` and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rht::cli
