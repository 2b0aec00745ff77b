#pragma once

#include <iosfwd>

namespace ntrr::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 input or validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ntrr::cli
