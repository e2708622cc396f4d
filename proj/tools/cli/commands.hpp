#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace memseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Failures print one JSON line to `err`:
///   {"error":"usage"|"runtime","message":"..."}
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace memseg::cli
