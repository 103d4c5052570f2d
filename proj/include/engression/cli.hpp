#pragma once

// `engress` command-line front end.

#include <iosfwd>
#include <string>
#include <vector>

namespace engression {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one invocation; `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace engression
