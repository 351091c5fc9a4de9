#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sphereopt/model.hpp"
#include "sphereopt/schemes.hpp"

namespace sphereopt {

enum class ExperimentKind { Train, Diagnose, Equivalence, OrderStudy, Sweep };

const char* experiment_kind_name(ExperimentKind k);
ExperimentKind experiment_kind_from_name(const std::string& name, int line);

struct ScheduleSpec {
  enum class Kind { Constant, StepDecay, ExpLr };
  Kind kind = Kind::Constant;
  std::vector<long> milestones;  // epochs (train) or steps (other kinds)
  double factor = 0.1;

  // Multiplier/learning rate at epoch/step k, given the scheme it drives.
  double eta_at(const SchemeSpec& scheme, long k) const;
};

struct ModelSpec {
  bool toy = false;  // toy loss instead of the MLP
  std::size_t toy_dim = 8;
  std::vector<std::size_t> layer_widths = {2, 8, 2};
  double bn_epsilon = 0.0;
  bool affine = false;
};

struct DataSpec {
  DatasetKind kind = DatasetKind::TwoGaussians;
  std::size_t n = 128;
  std::size_t batch_size = 32;
  std::string csv_path;          // when nonempty, load instead of synthesizing
  bool export_csv = false;       // write <prefix>_dataset.csv
};

struct ConfigWarning {
  int line = 0;
  std::string message;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Train;
  std::uint64_t seed = 0;
  long steps = 200;    // diagnose / equivalence
  long epochs = 100;   // train / sweep
  bool strict_assumptions = false;
  double r0 = 1.0;    // initial radius, scheme a (diagnose/equivalence)
  double r0_b = 1.0;  // initial radius, scheme b

  ModelSpec model;
  DataSpec data;

  SchemeSpec scheme;
  SchemeSpec scheme_b;
  bool has_scheme_b = false;
  bool derive_sgd_equivalent = false;  // scheme_b is the AdamG* scheme equivalent to scheme a

  ScheduleSpec schedule;
  ScheduleSpec schedule_b;

  int halvings = 3;       // order_study
  double horizon = 2.0;   // order_study continuous-time horizon

  std::vector<double> eta_grid;
  std::vector<double> lambda_grid;
  std::vector<double> beta2_grid;

  std::vector<ConfigWarning> warnings;
};

// Parse the line-oriented `key = value` format with [section] headers.
// Unknown sections/keys are rejected; a duplicate key wins with a warning.
ExperimentConfig parse_config(const std::string& text);

// Canonical serialization written next to the run artifacts.
std::string echo_config(const ExperimentConfig& config);

}  // namespace sphereopt
