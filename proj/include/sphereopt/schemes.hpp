#pragma once

#include <cstddef>
#include <string>

#include "sphereopt/vec.hpp"

namespace sphereopt {

enum class Variant {
  Sgd,
  SgdL2,
  SgdMomentum,
  Adam,
  AdamW,
  AdamGStar,
  AdamWoA,
  AdamWoAb,
  AdamWoAbc,
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws UnknownVariant

// Hyperparameters of the generic update x_{k+1} = x_k - eta_k * a_k ⊘ b_k
// and of its concrete instantiations.
struct SchemeSpec {
  Variant variant = Variant::Adam;
  double eta = 1e-2;     // base learning rate; schedules scale it per step
  double beta1 = 0.9;    // momentum factor (beta for SGD-M)
  double beta2 = 0.999;  // second-moment factor (also AdamG*'s v decay)
  double lambda = 0.0;   // L2 coefficient
  double epsilon = 1e-8;
  double v0 = 1.0;       // AdamG* initial scalar second moment

  void validate() const;  // throws InvalidHyperparameters
};

// Per-group optimizer state. For the transported variants the stored
// momentum is already expressed at the current point (Algorithm-1 ordering:
// the transform happens right after x_{k+1} is computed). The stored scalar
// second moment likewise carries the radius rescale for w/o (abc).
struct OptimizerState {
  long step = 0;  // index k of the next update, starting at 0
  Vec momentum;
  Vec second_moment;                  // elementwise v (Adam / AdamW)
  double scalar_second_moment = 0.0;  // scalar v (w/o variants, AdamG*)
  Vec prev_params;                    // x before the latest step
};

OptimizerState init_state(const SchemeSpec& spec, std::size_t dim);

struct StepResult {
  Vec x_next;
  // The (a, b) pair mapping this step onto the generic scheme; x_next is
  // literally generic_step(x, a, b, eta). For AdamG* these describe the
  // pre-normalization step and generic is false.
  Vec a;
  Vec b;
  bool generic = true;
};

// x - eta * (a ⊘ b), b elementwise positive.
Vec generic_step(const Vec& x, const Vec& a, const Vec& b, double eta);

// Scalar second-moment recursion
//   v' = beta2 * r_scale * v + (1 - beta2) * ||grad_full||^2 / d,
// with r_scale = r_{k-1}^2/r_k^2 for w/o (abc) and 1 otherwise.
double scalar_second_moment_update(double v, const Vec& grad_full, double beta2, std::size_t d,
                                   double r_scale);

// One optimizer step on one group; grad is the loss gradient at x, eta_k the
// scheduled learning rate. Mutates state (momentum, moments, counters).
StepResult apply_step(const SchemeSpec& spec, OptimizerState& state, const Vec& x, const Vec& grad,
                      double eta_k);

}  // namespace sphereopt
