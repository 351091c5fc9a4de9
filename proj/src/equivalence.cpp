#include "sphereopt/equivalence.hpp"

#include <cmath>

#include "sphereopt/spherical_lens.hpp"

namespace sphereopt {

SgdEquivalentAdamg sgd_equivalent_adamg(double eta, double lambda, double r0) {
  if (!(eta > 0.0) || !(lambda > 0.0) || !(r0 > 0.0))
    throw InvalidHyperparameters("sgd_equivalent_adamg needs eta, lambda, r0 > 0");
  if (!(eta * lambda < 1.0)) throw InvalidHyperparameters("sgd_equivalent_adamg needs eta*lambda < 1");
  SgdEquivalentAdamg m;
  const double base = 1.0 - eta * lambda;
  m.beta = base * base * base * base;
  m.eta_tilde = 1.0 / std::sqrt(2.0 * m.beta);
  m.v0 = r0 * r0 * r0 * r0 / (2.0 * eta * eta * std::sqrt(m.beta));
  return m;
}

double explr_schedule(double eta, double lambda, long k) {
  if (!(eta > 0.0) || lambda < 0.0 || !(eta * lambda < 1.0))
    throw InvalidHyperparameters("explr_schedule needs eta > 0 and eta*lambda < 1");
  return eta * std::pow(1.0 - eta * lambda, static_cast<double>(-2 * k - 1));
}

double sgd_radius_closed_form(double r0, const std::vector<double>& eta_history,
                              const std::vector<double>& grad_norm_history) {
  if (eta_history.size() != grad_norm_history.size())
    throw DimensionMismatch("radius histories must be aligned");
  double sum = 0.0;
  for (std::size_t i = 0; i < eta_history.size(); ++i) {
    const double step = eta_history[i] * grad_norm_history[i];
    sum += step * step;
  }
  return std::sqrt(2.0 * sum + r0 * r0 * r0 * r0);
}

double sgd_radius_exact_recursion(double r0, const std::vector<double>& eta_history,
                                  const std::vector<double>& grad_norm_history) {
  if (eta_history.size() != grad_norm_history.size())
    throw DimensionMismatch("radius histories must be aligned");
  double r_sq = r0 * r0;
  for (std::size_t i = 0; i < eta_history.size(); ++i) {
    const double step = eta_history[i] * grad_norm_history[i];
    r_sq += step * step / r_sq;
  }
  return r_sq;
}

double ToyLossProvider::loss_and_grads(const std::vector<Vec>& groups,
                                       std::vector<Vec>& grads) const {
  if (groups.size() != 1) throw ShapeMismatch("toy loss has exactly one group");
  auto [loss, grad] = toy_loss_and_grad(groups[0], target_);
  grads.assign(1, std::move(grad));
  return loss;
}

MlpLossProvider::MlpLossProvider(NormalizedMlp mlp, MlpParams frozen, Batch batch)
    : mlp_(std::move(mlp)), params_(std::move(frozen)), batch_(std::move(batch)) {
  group_count_ = NormalizedMlp::invariant_groups(params_).size();
}

std::size_t MlpLossProvider::group_dim(std::size_t g) const {
  return NormalizedMlp::invariant_groups(params_)[g]->size();
}

double MlpLossProvider::loss_and_grads(const std::vector<Vec>& groups,
                                       std::vector<Vec>& grads) const {
  auto slots = NormalizedMlp::invariant_groups(params_);
  if (groups.size() != slots.size()) throw ShapeMismatch("group count mismatch");
  for (std::size_t g = 0; g < slots.size(); ++g) *slots[g] = groups[g];
  auto [loss, g] = mlp_.loss_and_grad(params_, batch_);
  auto grad_slots = NormalizedMlp::invariant_groups(g);
  grads.resize(grad_slots.size());
  for (std::size_t i = 0; i < grad_slots.size(); ++i) grads[i] = *grad_slots[i];
  return loss;
}

std::vector<Vec> MlpLossProvider::initial_groups() const {
  std::vector<Vec> out;
  for (const Vec* g : NormalizedMlp::invariant_groups(params_)) out.push_back(*g);
  return out;
}

namespace {

constexpr double kAngleFloor = 1e-13;

struct RunState {
  std::vector<Vec> x;
  std::vector<OptimizerState> opt;
};

RunState start_run(const SchemeRun& run, const std::vector<UnitVector>& u0) {
  RunState s;
  for (const auto& u : u0) {
    s.x.push_back(scaled(u.coords(), run.r0));
    s.opt.push_back(init_state(run.spec, u.dim()));
  }
  return s;
}

double run_eta(const SchemeRun& run, long k) {
  return run.eta_at ? run.eta_at(k) : run.spec.eta;
}

}  // namespace

EquivalenceReport compare_trajectories(const SchemeRun& a, const SchemeRun& b,
                                       const LossProvider& loss,
                                       const std::vector<UnitVector>& u0, long steps) {
  if (u0.size() != loss.group_count()) throw ShapeMismatch("u0 must cover every group");
  RunState ra = start_run(a, u0);
  RunState rb = start_run(b, u0);

  EquivalenceReport report;
  report.steps_compared = steps;
  std::vector<Vec> grads_a, grads_b;
  for (long k = 0; k < steps; ++k) {
    loss.loss_and_grads(ra.x, grads_a);
    loss.loss_and_grads(rb.x, grads_b);
    double step_angle = 0.0;
    for (std::size_t g = 0; g < u0.size(); ++g) {
      ra.x[g] = apply_step(a.spec, ra.opt[g], ra.x[g], grads_a[g], run_eta(a, k)).x_next;
      rb.x[g] = apply_step(b.spec, rb.opt[g], rb.x[g], grads_b[g], run_eta(b, k)).x_next;
      const double angle =
          angle_between(split_radial(ra.x[g]).direction, split_radial(rb.x[g]).direction);
      step_angle = std::max(step_angle, angle);
    }
    if (step_angle < kAngleFloor) step_angle = 0.0;
    report.per_step_angles.push_back(step_angle);
    report.max_angle_deviation = std::max(report.max_angle_deviation, step_angle);
  }
  return report;
}

SufficientConditionCheck sufficient_condition_check(const SchemeRun& a, const SchemeRun& b,
                                                    const LossProvider& loss,
                                                    const std::vector<UnitVector>& u0,
                                                    long steps) {
  if (u0.size() != loss.group_count()) throw ShapeMismatch("u0 must cover every group");
  RunState ra = start_run(a, u0);
  RunState rb = start_run(b, u0);

  SufficientConditionCheck check;
  std::vector<Vec> grads_a, grads_b;
  for (long k = 0; k < steps; ++k) {
    loss.loss_and_grads(ra.x, grads_a);
    loss.loss_and_grads(rb.x, grads_b);
    for (std::size_t g = 0; g < u0.size(); ++g) {
      const Vec xa = ra.x[g];
      const Vec xb = rb.x[g];
      auto sa = apply_step(a.spec, ra.opt[g], xa, grads_a[g], run_eta(a, k));
      auto sb = apply_step(b.spec, rb.opt[g], xb, grads_b[g], run_eta(b, k));
      auto da = decompose_step(xa, sa.a, sa.b, run_eta(a, k));
      auto db = decompose_step(xb, sb.a, sb.b, run_eta(b, k));
      check.max_eta_eff_diff = std::max(
          check.max_eta_eff_diff,
          std::abs(da.eta_eff - db.eta_eff) / std::max(std::abs(da.eta_eff), 1e-300));
      check.max_c_perp_diff = std::max(check.max_c_perp_diff, max_abs_diff(da.c_perp, db.c_perp));
      ra.x[g] = sa.x_next;
      rb.x[g] = sb.x_next;
      const double angle =
          angle_between(split_radial(ra.x[g]).direction, split_radial(rb.x[g]).direction);
      check.max_angle_deviation = std::max(check.max_angle_deviation, angle);
    }
  }
  if (check.max_angle_deviation < kAngleFloor) check.max_angle_deviation = 0.0;
  return check;
}

std::pair<SchemeRun, SchemeRun> sgd_adamg_pair(double eta, double lambda, double r0) {
  SchemeRun sgd;
  sgd.spec.variant = Variant::SgdL2;
  sgd.spec.eta = eta;
  sgd.spec.lambda = lambda;
  sgd.r0 = r0;

  const SgdEquivalentAdamg map = sgd_equivalent_adamg(eta, lambda, r0);
  SchemeRun adamg;
  adamg.spec.variant = Variant::AdamGStar;
  adamg.spec.eta = map.eta_tilde;
  adamg.spec.beta2 = map.beta;
  adamg.spec.v0 = map.v0;
  adamg.r0 = 1.0;  // x~_0 = u_0
  return {std::move(sgd), std::move(adamg)};
}

std::pair<SchemeRun, SchemeRun> explr_pair(double eta, double lambda, double r0) {
  SchemeRun reg;
  reg.spec.variant = Variant::SgdL2;
  reg.spec.eta = eta;
  reg.spec.lambda = lambda;
  reg.r0 = r0;

  SchemeRun exp;
  exp.spec.variant = Variant::Sgd;
  exp.spec.eta = eta;
  exp.r0 = r0;
  exp.eta_at = [eta, lambda](long k) { return explr_schedule(eta, lambda, k); };
  return {std::move(reg), std::move(exp)};
}

OrderStudyResult order_study(double base_eta, int halvings, double horizon,
                             const PairFactory& make_pair, const LossProvider& loss,
                             const std::vector<UnitVector>& u0) {
  if (halvings < 2) throw InvalidHyperparameters("order_study needs at least 2 halvings");

  OrderStudyResult result;
  double eta = base_eta;
  for (int h = 0; h <= halvings; ++h, eta /= 2.0) {
    const long steps = std::lround(horizon / eta);
    auto [a, b] = make_pair(eta);
    auto report = compare_trajectories(a, b, loss, u0, steps);
    result.etas.push_back(eta);
    result.max_deviations.push_back(report.max_angle_deviation);
  }

  double exponent_sum = 0.0;
  int exponent_terms = 0;
  for (std::size_t i = 0; i + 1 < result.max_deviations.size(); ++i) {
    if (result.max_deviations[i] < 1e-13 || result.max_deviations[i + 1] < 1e-13)
      throw DegenerateDeviation();
    exponent_sum += std::log2(result.max_deviations[i] / result.max_deviations[i + 1]);
    ++exponent_terms;
  }
  result.scaling_exponent = exponent_sum / exponent_terms;
  return result;
}

}  // namespace sphereopt
