#include "sphereopt/schemes.hpp"

#include <cmath>

#include "sphereopt/sphere_geometry.hpp"

namespace sphereopt {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Sgd: return "sgd";
    case Variant::SgdL2: return "sgd_l2";
    case Variant::SgdMomentum: return "sgd_m";
    case Variant::Adam: return "adam";
    case Variant::AdamW: return "adamw";
    case Variant::AdamGStar: return "adamg_star";
    case Variant::AdamWoA: return "adam_wo_a";
    case Variant::AdamWoAb: return "adam_wo_ab";
    case Variant::AdamWoAbc: return "adam_wo_abc";
  }
  throw UnknownVariant();
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::Sgd, Variant::SgdL2, Variant::SgdMomentum, Variant::Adam,
                    Variant::AdamW, Variant::AdamGStar, Variant::AdamWoA, Variant::AdamWoAb,
                    Variant::AdamWoAbc}) {
    if (name == variant_name(v)) return v;
  }
  throw UnknownVariant("unknown scheme variant '" + name + "'");
}

void SchemeSpec::validate() const {
  if (!(eta > 0.0)) throw InvalidHyperparameters("eta must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidHyperparameters("beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidHyperparameters("beta2 must be in [0,1)");
  if (!(lambda >= 0.0)) throw InvalidHyperparameters("lambda must be >= 0");
  if (!(epsilon >= 0.0)) throw InvalidHyperparameters("epsilon must be >= 0");
  if (!(v0 >= 0.0)) throw InvalidHyperparameters("v0 must be >= 0");
  if (variant == Variant::AdamGStar && !(v0 > 0.0))
    throw InvalidHyperparameters("adamg_star requires v0 > 0");
}

OptimizerState init_state(const SchemeSpec& spec, std::size_t dim) {
  spec.validate();
  OptimizerState s;
  s.momentum = zeros(dim);
  if (spec.variant == Variant::Adam || spec.variant == Variant::AdamW)
    s.second_moment = zeros(dim);
  if (spec.variant == Variant::AdamGStar) s.scalar_second_moment = spec.v0;
  return s;
}

Vec generic_step(const Vec& x, const Vec& a, const Vec& b, double eta) {
  Vec delta = hadamard_div(a, b);
  Vec next = x;
  axpy(next, -eta, delta);
  return next;
}

double scalar_second_moment_update(double v, const Vec& grad_full, double beta2, std::size_t d,
                                   double r_scale) {
  return beta2 * r_scale * v + (1.0 - beta2) * dot(grad_full, grad_full) / static_cast<double>(d);
}

namespace {

Vec grad_plus_l2(const Vec& grad, const Vec& x, double lambda) {
  Vec g = grad;
  if (lambda != 0.0) axpy(g, lambda, x);
  return g;
}

StepResult sgd_family_step(const SchemeSpec& spec, OptimizerState& state, const Vec& x,
                           const Vec& grad, double eta_k) {
  StepResult out;
  switch (spec.variant) {
    case Variant::Sgd:
      out.a = grad;
      break;
    case Variant::SgdL2:
      out.a = grad_plus_l2(grad, x, spec.lambda);
      break;
    case Variant::SgdMomentum: {
      Vec g = grad_plus_l2(grad, x, spec.lambda);
      Vec m = scaled(state.momentum, spec.beta1);
      axpy(m, 1.0, g);
      state.momentum = m;
      out.a = m;
      break;
    }
    default:
      throw UnknownVariant();
  }
  out.b = ones(x.size());
  out.x_next = generic_step(x, out.a, out.b, eta_k);
  return out;
}

StepResult adam_step(const SchemeSpec& spec, OptimizerState& state, const Vec& x, const Vec& grad,
                     double eta_k) {
  const long k = state.step;
  const bool decoupled = spec.variant == Variant::AdamW;
  const Vec g = decoupled ? grad : grad_plus_l2(grad, x, spec.lambda);

  Vec m = scaled(state.momentum, spec.beta1);
  axpy(m, 1.0 - spec.beta1, g);
  Vec v = scaled(state.second_moment, spec.beta2);
  axpy(v, 1.0 - spec.beta2, hadamard(g, g));
  state.momentum = m;
  state.second_moment = v;

  const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(k + 1));
  const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(k + 1));

  StepResult out;
  out.b.resize(x.size());
  // epsilon inside the square root, as the update equation writes it
  for (std::size_t i = 0; i < x.size(); ++i)
    out.b[i] = bc1 / (1.0 - spec.beta1) * std::sqrt(v[i] / bc2 + spec.epsilon);
  out.a = scaled(m, 1.0 / (1.0 - spec.beta1));
  if (decoupled && spec.lambda != 0.0) {
    // Fold the decoupled decay -eta*lambda*x into the generic momentum so the
    // whole step stays one generic update: a += lambda * x ⊙ b.
    axpy(out.a, spec.lambda, hadamard(x, out.b));
  }
  out.x_next = generic_step(x, out.a, out.b, eta_k);
  return out;
}

StepResult adam_wo_step(const SchemeSpec& spec, OptimizerState& state, const Vec& x,
                        const Vec& grad, double eta_k) {
  const long k = state.step;
  const std::size_t d = x.size();
  const Vec g = grad_plus_l2(grad, x, spec.lambda);

  // state.momentum already holds the transported momentum for wo (ab)/(abc);
  // state.scalar_second_moment already carries the radius rescale for (abc).
  Vec m = scaled(state.momentum, spec.beta1);
  axpy(m, 1.0 - spec.beta1, g);
  const double v = scalar_second_moment_update(state.scalar_second_moment, g, spec.beta2, d, 1.0);

  const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(k + 1));
  const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(k + 1));
  // epsilon outside the square root, matching the w/o algorithm listing
  const double denom = bc1 / (1.0 - spec.beta1) * (std::sqrt(v / bc2) + spec.epsilon);

  StepResult out;
  out.a = scaled(m, 1.0 / (1.0 - spec.beta1));
  out.b = Vec(d, denom);
  out.x_next = generic_step(x, out.a, out.b, eta_k);

  state.momentum = m;
  state.scalar_second_moment = v;
  if (spec.variant == Variant::AdamWoAb) {
    const UnitVector u_prev = split_radial(x).direction;
    const UnitVector u_next = split_radial(out.x_next).direction;
    state.momentum = transport(u_prev, u_next, m);
  } else if (spec.variant == Variant::AdamWoAbc) {
    state.momentum = rt_transform(x, out.x_next, m);
    const double r_prev_sq = dot(x, x);
    const double r_next_sq = dot(out.x_next, out.x_next);
    if (r_next_sq == 0.0) throw ZeroVector("parameter group collapsed to zero");
    state.scalar_second_moment = v * (r_prev_sq / r_next_sq);
  }
  return out;
}

StepResult adamg_star_step(const SchemeSpec& spec, OptimizerState& state, const Vec& x,
                           const Vec& grad, double eta_k) {
  const double v = state.scalar_second_moment;
  const double root_v = std::sqrt(v);

  StepResult out;
  out.generic = false;
  out.a = grad;
  out.b = Vec(x.size(), root_v);
  Vec hat = x;
  axpy(hat, -eta_k / root_v, grad);
  const double n = norm2(hat);
  if (n == 0.0) throw ZeroVector("adamg_star step collapsed to zero");
  out.x_next = scaled(hat, 1.0 / n);

  state.scalar_second_moment = spec.beta2 * v + dot(grad, grad);
  return out;
}

}  // namespace

StepResult apply_step(const SchemeSpec& spec, OptimizerState& state, const Vec& x, const Vec& grad,
                      double eta_k) {
  check_same_dim(grad, x);
  if (!(eta_k > 0.0)) throw InvalidHyperparameters("scheduled eta must be > 0");

  StepResult out;
  switch (spec.variant) {
    case Variant::Sgd:
    case Variant::SgdL2:
    case Variant::SgdMomentum:
      out = sgd_family_step(spec, state, x, grad, eta_k);
      break;
    case Variant::Adam:
    case Variant::AdamW:
      out = adam_step(spec, state, x, grad, eta_k);
      break;
    case Variant::AdamWoA:
    case Variant::AdamWoAb:
    case Variant::AdamWoAbc:
      out = adam_wo_step(spec, state, x, grad, eta_k);
      break;
    case Variant::AdamGStar:
      out = adamg_star_step(spec, state, x, grad, eta_k);
      break;
  }
  state.prev_params = x;
  state.step += 1;
  return out;
}

}  // namespace sphereopt
