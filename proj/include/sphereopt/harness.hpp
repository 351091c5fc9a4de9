#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sphereopt/config.hpp"

namespace sphereopt {

// Exit codes shared by run_experiment and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitAssumptionViolation = 3;
inline constexpr int kExitNumericFailure = 4;

struct RunOutcome {
  int exit_code = kExitOk;
  // Ordered key/value pairs, exactly what lands in <prefix>_summary.csv.
  std::vector<std::pair<std::string, double>> summary;

  double summary_value(const std::string& key) const;
  bool has_summary(const std::string& key) const;
};

// Runs one experiment and writes its artifacts:
//   <prefix>_summary.csv         key,value rows (all kinds)
//   <prefix>_config_echo.txt     canonical config echo
//   <prefix>_trajectory.csv      train/diagnose step log
//   <prefix>_angles.csv          equivalence per-step angles
//   <prefix>_order.csv           order-study deviations per eta
//   <prefix>_sweep.csv           sweep summary rows
//   <prefix>_dataset.csv         when data.export_csv is set
// Deterministic: a fixed (config, seed) pair produces byte-identical files.
RunOutcome run_experiment(const ExperimentConfig& config, const std::string& out_prefix);

// Full CLI surface: <train|diagnose|equivalence|order-study|sweep>
// --config PATH [--out PREFIX] [--seed N] [--strict].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string format_double(double v);  // %.17g, the CSV number format

}  // namespace sphereopt
