#include "sphereopt/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "sphereopt/equivalence.hpp"
#include "sphereopt/spherical_lens.hpp"

namespace sphereopt {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double RunOutcome::summary_value(const std::string& key) const {
  for (const auto& [k, v] : summary)
    if (k == key) return v;
  throw Error("summary key '" + key + "' not found");
}

bool RunOutcome::has_summary(const std::string& key) const {
  for (const auto& [k, v] : summary)
    if (k == key) return true;
  return false;
}

namespace {

// Sub-seeds of the run seed, one stream per purpose.
enum SeedPurpose : std::uint64_t { kDataSeed = 1, kInitSeed = 2, kShuffleSeed = 3, kToySeed = 4 };

std::uint64_t sub_seed(std::uint64_t base, SeedPurpose purpose) {
  return derive_seed(base, {static_cast<std::uint64_t>(purpose)});
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open output file " + path);
  return f;
}

struct TrajectoryRow {
  long step;
  std::string group_id;
  double loss;
  double r;
  double eta_eff;
  double a_dot;
  double step_len;
  double c_dot_u;
  double nu;
  double radius_resid;
  double angle_resid;
};

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  auto f = open_out(path);
  f << "step,group_id,loss,r,eta_eff,a_dot,step_len,c_dot_u,nu,radius_resid,angle_resid\n";
  for (const auto& r : rows) {
    f << r.step << "," << r.group_id << "," << format_double(r.loss) << "," << format_double(r.r)
      << "," << format_double(r.eta_eff) << "," << format_double(r.a_dot) << ","
      << format_double(r.step_len) << "," << format_double(r.c_dot_u) << ","
      << format_double(r.nu) << "," << format_double(r.radius_resid) << ","
      << format_double(r.angle_resid) << "\n";
  }
}

void write_summary_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& summary) {
  auto f = open_out(path);
  f << "key,value\n";
  for (const auto& [k, v] : summary) f << k << "," << format_double(v) << "\n";
}

UnitVector random_unit(Rng& rng, std::size_t d) {
  for (;;) {
    Vec v(d);
    for (auto& c : v) c = rng.normal();
    if (norm2(v) > 1e-8) return split_radial(v).direction;
  }
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.data.csv_path.empty()) {
    std::ifstream in(cfg.data.csv_path, std::ios::binary);
    if (!in) throw ValidationError("dataset file '" + cfg.data.csv_path + "' does not exist", 0);
    return read_dataset_csv(in);
  }
  return make_synthetic_dataset(cfg.data.kind, cfg.data.n, sub_seed(cfg.seed, kDataSeed));
}

// Residual parameters (BN affine, output layer) always run plain Adam with
// the scheme's rates and no weight decay.
SchemeSpec residual_adam(const SchemeSpec& scheme) {
  SchemeSpec spec = scheme;
  spec.variant = Variant::Adam;
  spec.lambda = 0.0;
  if (!(spec.epsilon > 0.0)) spec.epsilon = 1e-8;
  return spec;
}

struct TrainOutput {
  std::vector<TrajectoryRow> rows;
  std::vector<std::pair<std::string, double>> summary;
  int exit_code = kExitOk;
  Dataset dataset;
};

// Shared per-step bookkeeping for train and diagnose loops.
class StepLogger {
 public:
  StepLogger(const ExperimentConfig& cfg, std::vector<TrajectoryRow>& rows)
      : cfg_(cfg), rows_(rows) {}

  // Returns false when a strict assumption violation must abort the run.
  bool log(long step, const std::string& group_id, double loss, const Vec& x_before,
           const Vec& grad, const StepResult& result, double eta_k) {
    TrajectoryRow row{};
    row.step = step;
    row.group_id = group_id;
    row.loss = loss;
    row.r = norm2(x_before);
    const double taylor_var = eta_k * eta_k * dot(grad, grad);
    try {
      StepDecomposition dec = decompose_step(x_before, result.a, result.b, eta_k);
      StepResiduals res = verify_step(x_before, result.x_next, dec);
      row.eta_eff = dec.eta_eff;
      row.a_dot = dec.A * dec.radial_dot;
      row.step_len = dec.step_length;
      row.c_dot_u = dec.radial_dot;
      row.nu = nu_live(x_before, result.b);
      row.angle_resid = res.angle_defect;
      // The generic radius prediction does not apply to the constrained
      // scheme, whose radius is reset to 1 by construction.
      row.radius_resid = result.generic ? res.radius_defect
                                        : std::numeric_limits<double>::quiet_NaN();
      monitor_update(monitor_, dec, taylor_var);
    } catch (const AssumptionViolated&) {
      ++violations_;
      row.eta_eff = row.a_dot = row.step_len = row.c_dot_u = row.nu = row.radius_resid =
          row.angle_resid = std::numeric_limits<double>::quiet_NaN();
      rows_.push_back(std::move(row));
      return !cfg_.strict_assumptions;
    }
    rows_.push_back(std::move(row));
    return true;
  }

  const AssumptionMonitor& monitor() const { return monitor_; }
  long violations() const { return violations_; }

 private:
  const ExperimentConfig& cfg_;
  std::vector<TrajectoryRow>& rows_;
  AssumptionMonitor monitor_;
  long violations_ = 0;
};

TrainOutput train_loop(const ExperimentConfig& cfg) {
  TrainOutput out;
  out.dataset = load_dataset(cfg);
  if (out.dataset.n_features != cfg.model.layer_widths.front())
    throw ValidationError("model input width does not match the dataset feature count", 0);

  NormalizedMlpConfig mcfg{cfg.model.layer_widths, cfg.model.bn_epsilon, cfg.model.affine};
  NormalizedMlp mlp(mcfg);
  Rng init_rng(sub_seed(cfg.seed, kInitSeed));
  MlpParams params = mlp.init_params(init_rng);

  auto groups = NormalizedMlp::invariant_groups(params);
  auto group_ids = mlp.invariant_group_ids();
  std::vector<OptimizerState> states;
  for (const Vec* g : groups) states.push_back(init_state(cfg.scheme, g->size()));

  const SchemeSpec res_spec = residual_adam(cfg.scheme);
  auto residuals = NormalizedMlp::residual_params(params);
  std::vector<OptimizerState> res_states;
  for (const Vec* r : residuals) res_states.push_back(init_state(res_spec, r->size()));

  StepLogger logger(cfg, out.rows);
  Rng shuffle_rng(sub_seed(cfg.seed, kShuffleSeed));

  long step = 0;
  long losses_seen = 0;
  double loss_sum = 0.0;
  double last_loss = 0.0;
  bool aborted = false;
  for (long epoch = 0; epoch < cfg.epochs && !aborted; ++epoch) {
    const double eta_k = cfg.schedule.eta_at(cfg.scheme, epoch);
    auto batches = make_batches(out.dataset, cfg.data.batch_size, shuffle_rng);
    if (batches.empty()) throw ValidationError("batch_size exceeds the dataset size", 0);
    for (const Batch& batch : batches) {
      auto [loss, grads] = mlp.loss_and_grad(params, batch);
      loss_sum += loss;
      ++losses_seen;
      last_loss = loss;
      auto grad_groups = NormalizedMlp::invariant_groups(grads);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const Vec x_before = *groups[g];
        StepResult result = apply_step(cfg.scheme, states[g], x_before, *grad_groups[g], eta_k);
        if (!logger.log(step, group_ids[g], loss, x_before, *grad_groups[g], result, eta_k)) {
          aborted = true;
          break;
        }
        *groups[g] = result.x_next;
      }
      if (aborted) break;
      auto grad_res = NormalizedMlp::residual_params(grads);
      for (std::size_t r = 0; r < residuals.size(); ++r)
        *residuals[r] =
            apply_step(res_spec, res_states[r], *residuals[r], *grad_res[r], eta_k).x_next;
      ++step;
    }
  }

  out.summary.emplace_back("steps", static_cast<double>(losses_seen));
  out.summary.emplace_back("groups", static_cast<double>(groups.size()));
  out.summary.emplace_back("mean_loss", loss_sum / static_cast<double>(losses_seen));
  out.summary.emplace_back("final_loss", last_loss);
  out.summary.emplace_back("max_a_dot", logger.monitor().max_a_dot);
  out.summary.emplace_back("max_step", logger.monitor().max_step);
  out.summary.emplace_back("max_taylor_var", logger.monitor().max_taylor_var);
  out.summary.emplace_back("assumption_violations", static_cast<double>(logger.violations()));
  out.exit_code = aborted ? kExitAssumptionViolation : kExitOk;
  return out;
}

TrainOutput diagnose_loop(const ExperimentConfig& cfg) {
  if (!cfg.model.toy)
    throw ValidationError("diagnose experiments run on the toy loss (set model.loss = toy)", 0);
  TrainOutput out;
  Rng toy_rng(sub_seed(cfg.seed, kToySeed));
  const UnitVector target = random_unit(toy_rng, cfg.model.toy_dim);
  const UnitVector u0 = random_unit(toy_rng, cfg.model.toy_dim);
  Vec x = scaled(u0.coords(), cfg.r0);
  OptimizerState state = init_state(cfg.scheme, x.size());

  StepLogger logger(cfg, out.rows);
  double loss_sum = 0.0;
  double last_loss = 0.0;
  bool aborted = false;
  long step = 0;
  for (; step < cfg.steps; ++step) {
    auto [loss, grad] = toy_loss_and_grad(x, target);
    loss_sum += loss;
    last_loss = loss;
    const double eta_k = cfg.schedule.eta_at(cfg.scheme, step);
    StepResult result = apply_step(cfg.scheme, state, x, grad, eta_k);
    if (!logger.log(step, "toy", loss, x, grad, result, eta_k)) {
      aborted = true;
      ++step;
      break;
    }
    x = result.x_next;
  }

  out.summary.emplace_back("steps", static_cast<double>(step));
  out.summary.emplace_back("groups", 1.0);
  out.summary.emplace_back("mean_loss", loss_sum / static_cast<double>(step));
  out.summary.emplace_back("final_loss", last_loss);
  out.summary.emplace_back("final_r", norm2(x));
  out.summary.emplace_back("max_a_dot", logger.monitor().max_a_dot);
  out.summary.emplace_back("max_step", logger.monitor().max_step);
  out.summary.emplace_back("max_taylor_var", logger.monitor().max_taylor_var);
  out.summary.emplace_back("assumption_violations", static_cast<double>(logger.violations()));
  out.exit_code = aborted ? kExitAssumptionViolation : kExitOk;
  return out;
}

// Loss provider + starting directions for equivalence-style experiments.
struct EquivalenceSetup {
  std::unique_ptr<LossProvider> provider;
  std::vector<UnitVector> u0;
  Dataset dataset;
};

EquivalenceSetup equivalence_setup(const ExperimentConfig& cfg) {
  EquivalenceSetup setup;
  if (cfg.model.toy) {
    Rng toy_rng(sub_seed(cfg.seed, kToySeed));
    UnitVector target = random_unit(toy_rng, cfg.model.toy_dim);
    setup.u0.push_back(random_unit(toy_rng, cfg.model.toy_dim));
    setup.provider = std::make_unique<ToyLossProvider>(std::move(target));
    return setup;
  }
  setup.dataset = load_dataset(cfg);
  if (setup.dataset.n_features != cfg.model.layer_widths.front())
    throw ValidationError("model input width does not match the dataset feature count", 0);
  NormalizedMlpConfig mcfg{cfg.model.layer_widths, cfg.model.bn_epsilon, cfg.model.affine};
  NormalizedMlp mlp(mcfg);
  Rng init_rng(sub_seed(cfg.seed, kInitSeed));
  MlpParams params = mlp.init_params(init_rng);
  for (const Vec* g : NormalizedMlp::invariant_groups(params))
    setup.u0.push_back(split_radial(*g).direction);
  setup.provider =
      std::make_unique<MlpLossProvider>(std::move(mlp), std::move(params), full_batch(setup.dataset));
  return setup;
}

SchemeRun scheme_run_a(const ExperimentConfig& cfg) {
  SchemeRun run;
  run.spec = cfg.scheme;
  run.r0 = cfg.r0;
  run.eta_at = [cfg](long k) { return cfg.schedule.eta_at(cfg.scheme, k); };
  return run;
}

SchemeRun scheme_run_b(const ExperimentConfig& cfg) {
  SchemeRun run;
  run.spec = cfg.scheme_b;
  run.r0 = cfg.r0_b;
  if (cfg.derive_sgd_equivalent) {
    const SgdEquivalentAdamg map = sgd_equivalent_adamg(cfg.scheme.eta, cfg.scheme.lambda, cfg.r0);
    run.spec.variant = Variant::AdamGStar;
    run.spec.eta = map.eta_tilde;
    run.spec.beta2 = map.beta;
    run.spec.v0 = map.v0;
    run.spec.lambda = 0.0;
    run.r0 = 1.0;
    run.eta_at = [eta = map.eta_tilde](long) { return eta; };
  } else {
    run.eta_at = [cfg](long k) { return cfg.schedule_b.eta_at(cfg.scheme_b, k); };
  }
  return run;
}

RunOutcome run_equivalence(const ExperimentConfig& cfg, const std::string& prefix) {
  EquivalenceSetup setup = equivalence_setup(cfg);
  EquivalenceReport report = compare_trajectories(scheme_run_a(cfg), scheme_run_b(cfg),
                                                  *setup.provider, setup.u0, cfg.steps);
  auto angles = open_out(prefix + "_angles.csv");
  angles << "step,angle\n";
  for (std::size_t k = 0; k < report.per_step_angles.size(); ++k)
    angles << (k + 1) << "," << format_double(report.per_step_angles[k]) << "\n";

  RunOutcome out;
  out.summary.emplace_back("steps_compared", static_cast<double>(report.steps_compared));
  out.summary.emplace_back("groups", static_cast<double>(setup.u0.size()));
  out.summary.emplace_back("max_angle", report.max_angle_deviation);
  return out;
}

RunOutcome run_order_study(const ExperimentConfig& cfg, const std::string& prefix) {
  if (!cfg.model.toy)
    throw ValidationError("order_study experiments run on the toy loss", 0);
  EquivalenceSetup setup = equivalence_setup(cfg);
  const double lambda = cfg.scheme.lambda;
  const double r0 = cfg.r0;
  OrderStudyResult result = order_study(
      cfg.scheme.eta, cfg.halvings, cfg.horizon,
      [lambda, r0](double eta) { return sgd_adamg_pair(eta, lambda, r0); }, *setup.provider,
      setup.u0);
  auto f = open_out(prefix + "_order.csv");
  f << "eta,max_deviation\n";
  for (std::size_t i = 0; i < result.etas.size(); ++i)
    f << format_double(result.etas[i]) << "," << format_double(result.max_deviations[i]) << "\n";

  RunOutcome out;
  out.summary.emplace_back("halvings", static_cast<double>(cfg.halvings));
  out.summary.emplace_back("horizon", cfg.horizon);
  out.summary.emplace_back("scaling_exponent", result.scaling_exponent);
  out.summary.emplace_back("max_deviation_finest", result.max_deviations.back());
  return out;
}

RunOutcome run_sweep(const ExperimentConfig& cfg, const std::string& prefix) {
  std::vector<double> etas = cfg.eta_grid;
  std::vector<double> lambdas = cfg.lambda_grid.empty() ? std::vector<double>{cfg.scheme.lambda}
                                                        : cfg.lambda_grid;
  std::vector<double> beta2s = cfg.beta2_grid.empty() ? std::vector<double>{cfg.scheme.beta2}
                                                      : cfg.beta2_grid;
  std::sort(etas.begin(), etas.end());
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(beta2s.begin(), beta2s.end());

  auto f = open_out(prefix + "_sweep.csv");
  f << "eta,lambda,beta2,seed,steps,mean_loss,final_loss,max_a_dot,max_step,"
       "assumption_violations\n";
  long points = 0;
  int worst_exit = kExitOk;
  for (double eta : etas) {
    for (double lambda : lambdas) {
      for (double beta2 : beta2s) {
        ExperimentConfig point = cfg;
        point.kind = ExperimentKind::Train;
        point.scheme.eta = eta;
        point.scheme.lambda = lambda;
        point.scheme.beta2 = beta2;
        point.seed = derive_seed(cfg.seed, {std::bit_cast<std::uint64_t>(eta),
                                            std::bit_cast<std::uint64_t>(lambda),
                                            std::bit_cast<std::uint64_t>(beta2)});
        TrainOutput run = train_loop(point);
        worst_exit = std::max(worst_exit, run.exit_code);
        f << format_double(eta) << "," << format_double(lambda) << "," << format_double(beta2)
          << "," << point.seed;
        for (const char* key : {"steps", "mean_loss", "final_loss", "max_a_dot", "max_step",
                                "assumption_violations"}) {
          const auto it = std::find_if(run.summary.begin(), run.summary.end(),
                                       [key](const auto& kv) { return kv.first == key; });
          if (it == run.summary.end()) throw Error(std::string("missing summary key ") + key);
          f << "," << format_double(it->second);
        }
        f << "\n";
        ++points;
      }
    }
  }

  RunOutcome out;
  out.exit_code = worst_exit;
  out.summary.emplace_back("grid_points", static_cast<double>(points));
  return out;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& prefix) {
  cfg.scheme.validate();
  if (cfg.has_scheme_b && !cfg.derive_sgd_equivalent) cfg.scheme_b.validate();

  RunOutcome out;
  switch (cfg.kind) {
    case ExperimentKind::Train: {
      TrainOutput run = train_loop(cfg);
      write_trajectory_csv(prefix + "_trajectory.csv", run.rows);
      if (cfg.data.export_csv) {
        auto f = open_out(prefix + "_dataset.csv");
        write_dataset_csv(f, run.dataset);
      }
      out.exit_code = run.exit_code;
      out.summary = std::move(run.summary);
      break;
    }
    case ExperimentKind::Diagnose: {
      TrainOutput run = diagnose_loop(cfg);
      write_trajectory_csv(prefix + "_trajectory.csv", run.rows);
      out.exit_code = run.exit_code;
      out.summary = std::move(run.summary);
      break;
    }
    case ExperimentKind::Equivalence:
      out = run_equivalence(cfg, prefix);
      break;
    case ExperimentKind::OrderStudy:
      out = run_order_study(cfg, prefix);
      break;
    case ExperimentKind::Sweep:
      out = run_sweep(cfg, prefix);
      break;
  }

  write_summary_csv(prefix + "_summary.csv", out.summary);
  auto echo = open_out(prefix + "_config_echo.txt");
  echo << echo_config(cfg);
  return out;
}

namespace {

ExperimentKind kind_from_subcommand(const std::string& name) {
  if (name == "order-study") return ExperimentKind::OrderStudy;
  return experiment_kind_from_name(name, 0);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::string usage =
      "usage: sphereopt <train|diagnose|equivalence|order-study|sweep> "
      "--config PATH [--out PREFIX] [--seed N] [--strict]";
  if (args.empty()) {
    err << usage << "\n";
    return kExitConfigError;
  }

  std::string config_path;
  std::string prefix = "sphereopt_out";
  bool strict = false;
  bool seed_override = false;
  std::uint64_t seed = 0;

  ExperimentKind kind;
  try {
    kind = kind_from_subcommand(args[0]);
  } catch (const ValidationError&) {
    err << "unknown subcommand '" << args[0] << "'\n" << usage << "\n";
    return kExitConfigError;
  }

  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto next = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw ValidationError("flag " + a + " needs a value", 0);
      return args[++i];
    };
    try {
      if (a == "--config")
        config_path = next();
      else if (a == "--out")
        prefix = next();
      else if (a == "--seed")
        seed_override = true, seed = std::stoull(next());
      else if (a == "--strict")
        strict = true;
      else {
        err << "unknown flag '" << a << "'\n" << usage << "\n";
        return kExitConfigError;
      }
    } catch (const std::exception& e) {
      err << e.what() << "\n";
      return kExitConfigError;
    }
  }
  if (config_path.empty()) {
    err << "--config is required\n" << usage << "\n";
    return kExitConfigError;
  }

  // Failures print one machine-readable record:
  //   error kind=<config|numeric|assumption> code=<exit code> [line=<n>] detail=<message>
  ExperimentConfig cfg;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      err << "error kind=config code=" << kExitConfigError << " detail=config file '"
          << config_path << "' does not exist\n";
      return kExitConfigError;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    cfg = parse_config(buffer.str());
  } catch (const ConfigError& e) {
    err << "error kind=config code=" << kExitConfigError << " line=" << e.line
        << " detail=" << e.what() << "\n";
    return kExitConfigError;
  }

  if (cfg.kind != kind) {
    err << "error kind=config code=" << kExitConfigError << " detail=config kind '"
        << experiment_kind_name(cfg.kind) << "' does not match the subcommand\n";
    return kExitConfigError;
  }
  if (seed_override) cfg.seed = seed;
  if (strict) cfg.strict_assumptions = true;
  for (const auto& w : cfg.warnings) err << "warning (line " << w.line << "): " << w.message << "\n";

  try {
    RunOutcome outcome = run_experiment(cfg, prefix);
    for (const auto& [k, v] : outcome.summary) out << k << " = " << format_double(v) << "\n";
    if (outcome.exit_code == kExitAssumptionViolation)
      err << "error kind=assumption code=" << kExitAssumptionViolation
          << " detail=1 - A<c,u> > 0 violated under --strict\n";
    return outcome.exit_code;
  } catch (const ConfigError& e) {
    err << "error kind=config code=" << kExitConfigError << " line=" << e.line
        << " detail=" << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    err << "error kind=numeric code=" << kExitNumericFailure << " detail=" << e.what() << "\n";
    return kExitNumericFailure;
  }
}

}  // namespace sphereopt
