#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace qunet::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Overrides run.output_root.
inline constexpr const char* kEnvOutputRoot = "QUNET_OUTPUT_ROOT";
/// Worker thread count for the linear-algebra kernels and quality scans.
inline constexpr const char* kEnvThreads = "QUNET_THREADS";

inline constexpr const char* kResolvedConfig = "config.resolved";

/// Parses `argv` (argv[0] is the program name) and runs one subcommand.
/// Returns 0 on success, 1 on runtime or validation failure, 2 on usage
/// errors.
int cli_dispatch(int argc, const char* const* argv);
/// Same, with `args` excluding the program name.
int cli_dispatch(const std::vector<std::string>& args);

/// Creates `<root>/<prefix>-<YYYYmmdd-HHMMSS>[-n]`, never reusing a name.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& prefix);

}  // namespace qunet::app
