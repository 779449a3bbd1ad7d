#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wgmr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `wgmr` tool. Results go to `out`, diagnostics and
/// usage text to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wgmr::cli
