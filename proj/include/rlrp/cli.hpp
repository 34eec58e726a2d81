#pragma once

#include <iosfwd>

namespace rlrp {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_io = 2;
inline constexpr int exit_numeric = 3;

/// Entry point of the `rlrp` tool. Subcommands: explain, eval, pointing,
/// distance, cross, verify.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rlrp
