#pragma once

#include <string>
#include <vector>

namespace eegstate {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitLeaky = 2;

/// Entry point of the eegstate command-line tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv);

/// Convenience overload; args exclude the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace eegstate
