#pragma once

#include <iosfwd>

namespace rfk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable consulted for the default --seed.
inline constexpr const char* kSeedEnv = "RFKERNEL_SEED";

/// Entry point for the `rfkernel` tool: subcommands `kernel`, `test` and `power`.
/// Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rfk::cli
