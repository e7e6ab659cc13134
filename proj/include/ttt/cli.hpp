#pragma once

#include <iosfwd>

namespace ttt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;  // some tasks failed; markers were written

/// Entry point of the arc-ttt tool. Output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ttt
