#pragma once

#include <iosfwd>

namespace xraydet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point for the `xraydet` tool: eval, nms, mosaic, attn-check, bench.
/// Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xraydet::cli
