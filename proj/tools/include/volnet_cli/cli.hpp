#pragma once

#include <iosfwd>

namespace volnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;       // bad configuration or input data
inline constexpr int kExitEstimation = 3;  // numerical or estimation failure

/// Runs `volnet <command> [flags]`. Never throws; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace volnet::cli
