#pragma once

#include <iosfwd>

namespace ilts::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // any other runtime error
inline constexpr int kExitUsage = 2;     // invalid arguments
inline constexpr int kExitIo = 3;        // unreadable, missing or corrupt files
inline constexpr int kExitMismatch = 4;  // checkpoint does not fit the data (context, family)

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ilts::cli
