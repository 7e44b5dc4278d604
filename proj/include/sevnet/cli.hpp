#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sevnet::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sevnet::cli
