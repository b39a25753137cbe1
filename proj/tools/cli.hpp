#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tracegraph::cli {

/// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitViolations = 1;  // validate found errors
inline constexpr int kExitInput = 2;       // unreadable, missing or malformed input
inline constexpr int kExitBudget = 3;      // attribution ended without a report
inline constexpr int kExitRun = 4;         // backend or configuration failure

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tracegraph::cli
