#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace orient::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command. `args` excludes the program name. Usage and errors go
/// to `err`, tables to `out`, results to files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orient::cli
