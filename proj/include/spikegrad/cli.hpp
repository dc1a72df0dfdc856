#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spikegrad {

/// Process exit codes of the `spikegrad` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
};

/// Entry point of the command-line tool. `args` excludes the program name.
/// Subcommands: gradcheck, toy, sweep, mnist, replay.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spikegrad
