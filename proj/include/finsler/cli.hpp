#pragma once

// Command-line front end. Exit codes: 0 ok, 1 negative classify verdict under
// --strict, 2 input error, 3 numerical failure.

#include <iosfwd>

namespace finsler::cli {

inline constexpr const char* kOutDirEnv = "FINSLER_LAB_OUT";

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace finsler::cli
