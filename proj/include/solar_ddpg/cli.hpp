#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace solar_ddpg {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Environment variable naming the default output root (runs/ otherwise).
inline constexpr const char* kOutputRootEnv = "SOLAR_DDPG_OUTPUT_ROOT";

/// Entry point of the `solar-ddpg` tool. args excludes the program name.
/// Returns 0 on success, 2 for configuration problems and missing inputs,
/// 1 for runtime failures. Errors are reported on `err` as a single line:
///   error kind=<class> [path=<key>] message="<text>"
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace solar_ddpg
