#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace vltool {

struct CommandOptions {
  std::string config;
  std::string resume;  // evolve only
  std::string out;     // overrides [output] dir when nonempty
  int threads = 1;
};

// 0 success, 2 validation, 3 convergence, 4 numerical blow-up, 1 anything else.
int exit_code(const Error& e);

// Runs one of geodesic, evolve, minmax, criticalpoint, flatnorm, diagnose and
// returns the process exit status. Errors are reported on `log`.
int run_command(const std::string& command, const CommandOptions& opts, std::ostream& log);

// The individual commands. They throw on error; criticalpoint returns 3 when
// the finite-eps targets are not all met.
int cmd_geodesic(const ExperimentConfig& c, const std::string& out, std::ostream& log);
int cmd_evolve(const ExperimentConfig& c, const std::string& out, const std::string& resume, std::ostream& log);
int cmd_minmax(const ExperimentConfig& c, const std::string& out, std::ostream& log);
int cmd_criticalpoint(const ExperimentConfig& c, const std::string& out, std::ostream& log);
int cmd_flatnorm(const ExperimentConfig& c, const std::string& out, std::ostream& log);
int cmd_diagnose(const ExperimentConfig& c, const std::string& out, std::ostream& log);

}  // namespace vltool
