#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "sphereopt/model.hpp"
#include "sphereopt/schemes.hpp"
#include "sphereopt/sphere_geometry.hpp"

namespace sphereopt {

// Hyperparameters of the AdamG* scheme that tracks SGD(eta, lambda, r0) on
// the unit hypersphere at order 2 in the radius dynamics.
struct SgdEquivalentAdamg {
  double beta;       // (1 - eta*lambda)^4
  double eta_tilde;  // (2 beta)^{-1/2}, constant over steps
  double v0;         // r0^4 / (2 eta^2 beta^{1/2})
};

SgdEquivalentAdamg sgd_equivalent_adamg(double eta, double lambda, double r0);

// eta * (1 - eta*lambda)^{-2k-1}: the exponential learning-rate schedule that
// replaces L2 regularization exactly.
double explr_schedule(double eta, double lambda, long k);

// Order-2 closed form of the plain-SGD squared radius,
//   r_k^2 = sqrt(2 sum_i (eta_i ||grad L(u_i)||)^2 + r0^4),
// alongside the exact recursion for residual measurement.
double sgd_radius_closed_form(double r0, const std::vector<double>& eta_history,
                              const std::vector<double>& grad_norm_history);
double sgd_radius_exact_recursion(double r0, const std::vector<double>& eta_history,
                                  const std::vector<double>& grad_norm_history);

// Deterministic full-batch loss over a fixed set of radially-invariant
// groups. Implementations must be pure functions of the group values.
class LossProvider {
 public:
  virtual ~LossProvider() = default;
  virtual std::size_t group_count() const = 0;
  virtual std::size_t group_dim(std::size_t g) const = 0;
  // Loss gradients with respect to every group at the given parameters.
  virtual double loss_and_grads(const std::vector<Vec>& groups,
                                std::vector<Vec>& grads) const = 0;
};

// Single group, L(x) = 1 - <x/||x||, u*>^2.
class ToyLossProvider : public LossProvider {
 public:
  explicit ToyLossProvider(UnitVector target) : target_(std::move(target)) {}
  std::size_t group_count() const override { return 1; }
  std::size_t group_dim(std::size_t) const override { return target_.dim(); }
  double loss_and_grads(const std::vector<Vec>& groups, std::vector<Vec>& grads) const override;
  const UnitVector& target() const { return target_; }

 private:
  UnitVector target_;
};

// Full-batch MLP loss as a function of the invariant groups only; residual
// parameters are frozen at their initial values so both compared runs see
// the identical deterministic loss.
class MlpLossProvider : public LossProvider {
 public:
  MlpLossProvider(NormalizedMlp mlp, MlpParams frozen, Batch batch);
  std::size_t group_count() const override { return group_count_; }
  std::size_t group_dim(std::size_t g) const override;
  double loss_and_grads(const std::vector<Vec>& groups, std::vector<Vec>& grads) const override;
  std::vector<Vec> initial_groups() const;

 private:
  NormalizedMlp mlp_;
  mutable MlpParams params_;
  Batch batch_;
  std::size_t group_count_;
};

// One side of a comparison: a scheme, its per-step learning rate, and the
// initial radius applied to the shared starting directions.
struct SchemeRun {
  SchemeSpec spec;
  std::function<double(long)> eta_at;  // defaults to constant spec.eta
  double r0 = 1.0;
};

struct EquivalenceReport {
  double max_angle_deviation = 0.0;
  std::vector<double> per_step_angles;  // entry k: max over groups after step k+1
  long steps_compared = 0;
  std::optional<double> scaling_exponent;
};

// Run both schemes from the same directions u0 and record the per-step
// angle arccos<u_k, u~_k>. Deviations below 1e-13 are reported as zero.
EquivalenceReport compare_trajectories(const SchemeRun& a, const SchemeRun& b,
                                       const LossProvider& loss,
                                       const std::vector<UnitVector>& u0, long steps);

// Per-step effective quantities of both runs, for exercising the sufficient
// equivalence condition (equal eta_eff and c_perp at every step).
struct SufficientConditionCheck {
  double max_eta_eff_diff = 0.0;
  double max_c_perp_diff = 0.0;
  double max_angle_deviation = 0.0;
};

SufficientConditionCheck sufficient_condition_check(const SchemeRun& a, const SchemeRun& b,
                                                    const LossProvider& loss,
                                                    const std::vector<UnitVector>& u0, long steps);

// Halve the step size and refit: the empirical order of a scheme pair's
// deviation under a fixed continuous-time horizon (steps scale like 1/eta).
struct OrderStudyResult {
  std::vector<double> etas;
  std::vector<double> max_deviations;
  double scaling_exponent = 0.0;
};

using PairFactory = std::function<std::pair<SchemeRun, SchemeRun>(double eta)>;

OrderStudyResult order_study(double base_eta, int halvings, double horizon,
                             const PairFactory& make_pair, const LossProvider& loss,
                             const std::vector<UnitVector>& u0);

// SGD(eta, lambda, r0) against the AdamG* scheme derived from it.
std::pair<SchemeRun, SchemeRun> sgd_adamg_pair(double eta, double lambda, double r0);

// SGD(eta, lambda, r0) against SGD(lambda = 0) on the exponential schedule;
// equivalent exactly, with no Taylor step.
std::pair<SchemeRun, SchemeRun> explr_pair(double eta, double lambda, double r0);

}  // namespace sphereopt
