#pragma once

#include <iosfwd>

namespace trojanq::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitTrojanFound = 2;

// Entry point for the `trojanq` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trojanq::cli
