#pragma once

#include <iosfwd>

namespace fowler {

// Exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitTheorem = 2;
inline constexpr int kExitIo = 3;

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace fowler
