#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pod::cli {

/// Exit codes: 0 success, 1 acceptance threshold failed, 2 usage/config error, 3 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitThreshold = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

int run(int argc, char** argv);

/// Same as run() with explicit arguments (args[0] is the program name) and streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace pod::cli
