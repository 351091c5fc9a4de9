#pragma once

#include <vector>

#include "sphereopt/schemes.hpp"
#include "sphereopt/sphere_geometry.hpp"
#include "sphereopt/vec.hpp"

namespace sphereopt {

// Exact spherical decomposition of one generic step x' = x - eta * a ⊘ b:
// the deformed momentum on the hypersphere c, the effective direction
// c_perp, the effective learning rate eta_eff, and the predicted next
// direction and radius ratio. All of it is algebra, not approximation.
struct StepDecomposition {
  Vec c;
  Vec c_perp;
  double A = 0.0;        // eta / (r^2 d^{-1/2} ||b||)
  double eta_eff = 0.0;  // A / (1 - A <c,u>)
  double radial_dot = 0.0;  // <c, u>
  UnitVector predicted_u_next;
  double predicted_radius_ratio = 1.0;
  double step_length = 0.0;  // eta_eff * ||c_perp||
};

StepDecomposition decompose_step(const Vec& x, const Vec& a, const Vec& b, double eta);

// Reconstruction residuals of an actual step against the decomposition's
// prediction; both should sit at the floating-point floor for every scheme
// of the generic family.
struct StepResiduals {
  double angle_defect = 0.0;
  double radius_defect = 0.0;
};

StepResiduals verify_step(const Vec& x_before, const Vec& x_after, const StepDecomposition& dec);

// Closed-form effective learning rates (SGD, SGD+L2, SGD-M, Adam rows).
// nu = r * d^{-1/2} ||b|| is only read for the Adam row.
double effective_lr_table(Variant variant, double r, double eta, double lambda, const Vec& c,
                          const UnitVector& u, double nu);

// Gradient-vs-L2 split of the SGD-M-style momentum on the sphere:
//   r_k a_k = c_grad + lambda r_k^2 c_l2.
struct MomentumSplit {
  Vec c_grad;
  Vec c_l2;
  std::vector<double> radius_history;
  std::vector<Vec> gradient_history;  // sphere gradients, grad L(u_i)
};

MomentumSplit split_momentum_history(const std::vector<double>& radius_history,
                                     const std::vector<Vec>& gradient_history, double beta,
                                     double lambda,
                                     const std::vector<UnitVector>& direction_history);

// Trajectory record needed by the nu closed forms.
struct SphereHistory {
  std::vector<double> radii;           // r_i
  std::vector<Vec> sphere_grads;       // grad L(u_i)
  std::vector<UnitVector> directions;  // u_i

  std::size_t size() const { return radii.size(); }
};

enum class NuVariant { Adam, WoAbc };

// nu_k, the scalar scheduling factor of the Adam-family effective learning
// rate, recomputed from recorded histories with epsilon treated as 0.
double nu_closed_form(NuVariant variant, const SphereHistory& history, double beta1, double beta2,
                      double lambda, std::size_t k);

// ||sqrt(v_k)||^2 from the history of ||grad L(x_i) + lambda x_i||^2.
double vk_norm_sq_closed_form(const std::vector<double>& grad_sq_norm_history, double beta2);

// The live counterpart of nu: r * d^{-1/2} ||b||.
double nu_live(const Vec& x, const Vec& b);

// Running maxima of the quantities the decomposition assumes stay small.
struct AssumptionMonitor {
  double max_a_dot = 0.0;       // max |A <c,u>|
  double max_step = 0.0;        // max eta_eff ||c_perp||
  double max_taylor_var = 0.0;  // max (eta ||grad L(u)||)^2 / r^2
  bool flagged = false;         // max_a_dot >= 1 or max_step >= pi seen
};

void monitor_update(AssumptionMonitor& monitor, const StepDecomposition& dec,
                    double sgd_taylor_var);

}  // namespace sphereopt
