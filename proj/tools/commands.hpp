#pragma once

// Subcommands of the bxr command line. Each takes a parsed JSON config and the
// global flags, writes its outputs under the output directory and returns the
// process exit code.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "bxr/io.hpp"

namespace bxr::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailure = 2;
inline constexpr int kExitUsage = 3;

struct GlobalOptions {
  int n = 3;
  double epsilon = 0.25;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int ode_steps = 0;  // 0: command default
  double fd_step = 1e-4;
  int threads = 1;
};

/// Splits the config into global options and the command-specific remainder.
/// Flags given on the command line override config values. Throws
/// Error(InvalidConfig) on malformed values.
GlobalOptions global_options(Json& config, std::optional<std::uint64_t> seed,
                             std::optional<int> threads, std::optional<std::string> out);

int cmd_verify(const Json& config, const GlobalOptions& g, std::ostream& log);
int cmd_forward(const Json& config, const GlobalOptions& g, std::ostream& log);
int cmd_synth(const Json& config, const GlobalOptions& g, std::ostream& log);
int cmd_invert(const Json& config, const GlobalOptions& g, std::ostream& log);
int cmd_report(const Json& config, const GlobalOptions& g, std::ostream& log);
int cmd_recover_gauge(const Json& config, const GlobalOptions& g, std::ostream& log);
int cmd_stability(const Json& config, const GlobalOptions& g, std::ostream& log);

/// Full command line: subcommand plus --config/--seed/--threads/--out.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bxr::cli
