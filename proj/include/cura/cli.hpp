#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cura::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `cura` binary. `args` excludes the program name.
/// Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cura::cli
