#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cxrseg::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;  // usage or configuration error
inline constexpr int kExitData = 3;   // unreadable, missing or inconsistent data
inline constexpr int kExitNumerical = 4;

/// Runs one command line (without the program name). Machine-readable
/// results go to files under --out or to `out`; logs and the one-line error
/// reason go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cxrseg::cli
