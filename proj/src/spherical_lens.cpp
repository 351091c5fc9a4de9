#include "sphereopt/spherical_lens.hpp"

#include <cmath>
#include <numbers>

namespace sphereopt {

namespace {

double inv_sqrt_d_norm(const Vec& b) {
  return norm2(b) / std::sqrt(static_cast<double>(b.size()));
}

}  // namespace

StepDecomposition decompose_step(const Vec& x, const Vec& a, const Vec& b, double eta) {
  check_same_dim(a, x);
  check_same_dim(b, x);
  const auto split = split_radial(x);
  const double r = split.radius;
  const UnitVector& u = split.direction;

  const double b_scale = inv_sqrt_d_norm(b);  // d^{-1/2} ||b||
  if (!(b_scale > 0.0)) throw NonPositiveDenominator("division vector has zero norm");

  // c = r a ⊘ (b / (d^{-1/2}||b||))
  Vec c(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(b[i] > 0.0)) throw NonPositiveDenominator();
    c[i] = r * a[i] * b_scale / b[i];
  }

  StepDecomposition dec{.c = std::move(c),
                        .c_perp = {},
                        .A = eta / (r * r * b_scale),
                        .eta_eff = 0.0,
                        .radial_dot = 0.0,
                        .predicted_u_next = u,
                        .predicted_radius_ratio = 1.0,
                        .step_length = 0.0};
  dec.radial_dot = dot(dec.c, u.coords());
  dec.c_perp = tangential_part(dec.c, u);

  const double margin = 1.0 - dec.A * dec.radial_dot;
  if (!(margin > 0.0))
    throw AssumptionViolated("1 - A<c,u> = " + std::to_string(margin) + " is not positive");
  dec.eta_eff = dec.A / margin;

  const double perp_norm = norm2(dec.c_perp);
  dec.step_length = dec.eta_eff * perp_norm;
  const double stretch = std::sqrt(1.0 + dec.step_length * dec.step_length);

  Vec next = u.coords();
  axpy(next, -dec.eta_eff, dec.c_perp);
  dec.predicted_u_next = UnitVector(scaled(next, 1.0 / stretch));
  dec.predicted_radius_ratio = margin * stretch;
  return dec;
}

StepResiduals verify_step(const Vec& x_before, const Vec& x_after, const StepDecomposition& dec) {
  const auto before = split_radial(x_before);
  const auto after = split_radial(x_after);
  StepResiduals res;
  res.angle_defect = angle_between(after.direction, dec.predicted_u_next);
  res.radius_defect = std::abs(after.radius / before.radius - dec.predicted_radius_ratio);
  return res;
}

double effective_lr_table(Variant variant, double r, double eta, double lambda, const Vec& c,
                          const UnitVector& u, double nu) {
  switch (variant) {
    case Variant::Sgd:
      return eta / (r * r);
    case Variant::SgdL2:
      return eta / (r * r * (1.0 - eta * lambda));
    case Variant::SgdMomentum: {
      const double c_dot_u = dot(c, u.coords());
      return eta / (r * r) / (1.0 - eta * c_dot_u / (r * r));
    }
    case Variant::Adam: {
      const double c_dot_u = dot(c, u.coords());
      return eta / (r * nu) / (1.0 - eta * c_dot_u / (r * nu));
    }
    default:
      throw UnknownVariant("no closed-form effective learning rate for this variant");
  }
}

MomentumSplit split_momentum_history(const std::vector<double>& radius_history,
                                     const std::vector<Vec>& gradient_history, double beta,
                                     double lambda,
                                     const std::vector<UnitVector>& direction_history) {
  (void)lambda;  // the split itself is lambda-free; lambda scales c_l2 in the reconstruction
  if (radius_history.empty()) throw EmptyHistory();
  if (gradient_history.size() != radius_history.size() ||
      direction_history.size() != radius_history.size())
    throw DimensionMismatch("momentum histories must be aligned");

  const std::size_t k = radius_history.size() - 1;
  const double r_k = radius_history[k];
  MomentumSplit split;
  split.radius_history = radius_history;
  split.gradient_history = gradient_history;

  split.c_grad = gradient_history[k];
  split.c_l2 = direction_history[k].coords();
  for (std::size_t i = 0; i < k; ++i) {
    const double w = std::pow(beta, static_cast<double>(k - i));
    axpy(split.c_grad, w * r_k / radius_history[i], gradient_history[i]);
    axpy(split.c_l2, w * radius_history[i] / r_k, direction_history[i].coords());
  }
  return split;
}

double nu_closed_form(NuVariant variant, const SphereHistory& history, double beta1, double beta2,
                      double lambda, std::size_t k) {
  if (history.size() == 0) throw EmptyHistory();
  if (k >= history.size()) throw EmptyHistory("history shorter than requested step");
  if (history.sphere_grads.size() != history.radii.size() ||
      history.directions.size() != history.radii.size())
    throw DimensionMismatch("sphere history must be aligned");

  const std::size_t d = history.sphere_grads[0].size();
  const double r_k = history.radii[k];

  double sum = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double r_i = history.radii[i];
    // grad L(u_i) + lambda * (radius factor) * u_i
    Vec term = history.sphere_grads[i];
    double weight = std::pow(beta2, static_cast<double>(k - i));
    if (variant == NuVariant::Adam) {
      axpy(term, lambda * r_i * r_i, history.directions[i].coords());
      weight *= (r_k * r_k) / (r_i * r_i);
    } else {
      // Exact unroll of the rescaled scalar recursion. (The r_i^2 factor on
      // the L2 term follows from r_i * (grad L(x_i) + lambda x_i); with it the
      // gradient contribution carries no radius ratio at all.)
      axpy(term, lambda * r_i * r_i, history.directions[i].coords());
    }
    sum += weight * dot(term, term);
  }

  const double bc1 = (1.0 - std::pow(beta1, static_cast<double>(k + 1))) / (1.0 - beta1);
  const double bc2 =
      (1.0 - beta2) / (1.0 - std::pow(beta2, static_cast<double>(k + 1)));
  return bc1 * std::sqrt(bc2 * sum / static_cast<double>(d));
}

double vk_norm_sq_closed_form(const std::vector<double>& grad_sq_norm_history, double beta2) {
  if (grad_sq_norm_history.empty()) throw EmptyHistory();
  const std::size_t k = grad_sq_norm_history.size() - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i <= k; ++i)
    sum += std::pow(beta2, static_cast<double>(k - i)) * grad_sq_norm_history[i];
  return (1.0 - beta2) * sum;
}

double nu_live(const Vec& x, const Vec& b) { return norm2(x) * inv_sqrt_d_norm(b); }

void monitor_update(AssumptionMonitor& monitor, const StepDecomposition& dec,
                    double sgd_taylor_var) {
  monitor.max_a_dot = std::max(monitor.max_a_dot, std::abs(dec.A * dec.radial_dot));
  monitor.max_step = std::max(monitor.max_step, dec.step_length);
  monitor.max_taylor_var = std::max(monitor.max_taylor_var, sgd_taylor_var);
  if (monitor.max_a_dot >= 1.0 || monitor.max_step >= std::numbers::pi) monitor.flagged = true;
}

}  // namespace sphereopt
