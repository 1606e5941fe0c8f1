#pragma once

#include <iosfwd>
#include <string>

#include "gtvlds/io.hpp"

namespace gtvlds {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitSolver = 3 };

struct RunOptions {
  std::string out_dir = "out";
  int jobs = 1;
  bool strict = false;
};

// Runs one subcommand (simulate | fit | sweep | theory | ingest | reproduce).
// Throws UsageError / DataError / SolverError; see run_command_safely.
void run_command(const std::string& command, const Config& cfg, const RunOptions& opts, std::ostream& log);

// Maps failures to exit codes and leaves an `<out>/.failed` marker behind.
int run_command_safely(const std::string& command, const Config& cfg, const RunOptions& opts, std::ostream& log,
                       std::ostream& err);

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gtvlds
