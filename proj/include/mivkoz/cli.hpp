#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace mivkoz {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitViolations = 1, kExitInput = 2, kExitRuntime = 3 };

struct StepStatus {
  std::string name;
  std::string status;  ///< "ok" or "failed"
  std::string detail;
};

/// Record written next to the outputs of each command.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<StepStatus> steps;
  nlohmann::json echo;      ///< resolved settings (scenario, sweep values, ...)
  double duration_s = 0.0;  ///< wall clock; excluded from content_hash

  nlohmann::json to_json() const;
  /// Hash over everything except the duration.
  std::string content_hash() const;
};

/// Entry point of the `mivkoz` binary. Subcommands: simulate, sweep, koz,
/// check. Returns one of ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mivkoz
