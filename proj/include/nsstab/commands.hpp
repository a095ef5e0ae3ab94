#pragma once

/// @file commands.hpp
/// @brief Subcommands of the command-line front end. Each is a thin shell over
/// the library: parse the configuration, call the module operations, write artifacts.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace nsstab {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitIntegrity = 3, kExitSolver = 4, kExitInternal = 1 };

struct CommandOptions {
  std::string config_path;  // empty: defaults only
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool svg = false;
};

int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_certify(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_stability(const CommandOptions& opt, std::ostream& out, std::ostream& err);
/// Verifies DIR/report.json (or DIR/certificate.json), prints a summary and,
/// with svg, redraws the plots from the CSV files.
int cmd_report(const CommandOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace nsstab
