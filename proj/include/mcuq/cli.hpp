#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mcuq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitUsage = 64;

inline constexpr std::string_view kVersion = "1.0.0";

/// Runs one `mcuq` command. `args` excludes the program name. Returns the
/// process exit code: 0 success, 2 numerical failure, 64 usage or input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcuq::cli
