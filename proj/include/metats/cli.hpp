#pragma once

#include <iosfwd>

namespace metats {

// Exit codes: 0 success, 1 invariant failure, 2 invalid input, 3 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitRuntime = 3;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metats
