#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sphereopt/model.hpp"
#include "sphereopt/rng.hpp"
#include "sphereopt/spherical_lens.hpp"

using namespace sphereopt;

namespace {

UnitVector random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  for (auto& c : v) c = rng.normal();
  return split_radial(v).direction;
}

Vec random_tangent(Rng& rng, const UnitVector& u, double length) {
  for (;;) {
    Vec v(u.dim());
    for (auto& c : v) c = rng.normal();
    Vec t = tangential_part(v, u);
    const double n = norm2(t);
    if (n > 1e-8) return scaled(t, length / n);
  }
}

struct ToyRun {
  SchemeSpec spec;
  OptimizerState state;
  UnitVector target;
  Vec x;
  SphereHistory history;               // r_i, grad L(u_i), u_i
  std::vector<double> full_grad_sq;    // ||grad L(x_i) + lambda x_i||^2
  std::vector<Vec> last_b;             // b_k of the latest step

  ToyRun(Variant v, double eta, double lambda, std::size_t d, std::uint64_t seed,
         double epsilon = 1e-8)
      : target({1.0, 0.0}) {
    spec.variant = v;
    spec.eta = eta;
    spec.lambda = lambda;
    spec.epsilon = epsilon;
    Rng rng(seed);
    target = random_unit(rng, d);
    x = scaled(random_unit(rng, d).coords(), 1.0 + rng.uniform(0.0, 0.5));
    state = init_state(spec, d);
  }

  StepResult step() {
    auto [loss, grad] = toy_loss_and_grad(x, target);
    (void)loss;
    auto split = split_radial(x);
    history.radii.push_back(split.radius);
    history.sphere_grads.push_back(scaled(grad, split.radius));  // grad L(u) = r grad L(x)
    history.directions.push_back(split.direction);
    Vec g_full = grad;
    axpy(g_full, spec.lambda, x);
    full_grad_sq.push_back(dot(g_full, g_full));

    auto result = apply_step(spec, state, x, grad, spec.eta);
    last_b.push_back(result.b);
    return result;
  }
};

}  // namespace

TEST_CASE("decompose_step reproduces the closed-form SGD rates") {
  // b = ones: d^{-1/2}||b|| = 1, c = grad L(u), eta_eff = eta / r^2
  Rng rng(3);
  UnitVector target = random_unit(rng, 4);
  Vec x = scaled(random_unit(rng, 4).coords(), 2.0);
  auto [loss, grad] = toy_loss_and_grad(x, target);
  (void)loss;
  auto dec = decompose_step(x, grad, ones(4), 0.1);

  CHECK(dec.eta_eff == doctest::Approx(0.1 / 4.0).epsilon(1e-12));
  CHECK(dec.A == doctest::Approx(0.1 / 4.0).epsilon(1e-12));
  Vec sphere_grad = scaled(grad, 2.0);
  CHECK(max_abs_diff(dec.c, sphere_grad) <= 1e-12 * norm2(sphere_grad));
  CHECK(std::abs(dec.radial_dot) <= 1e-12 * norm2(dec.c));
}

TEST_CASE("decompose_step with a = 0 predicts no motion") {
  Vec x{1.5, 0.0, 0.0};
  auto dec = decompose_step(x, zeros(3), ones(3), 0.1);
  CHECK(dec.predicted_radius_ratio == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(max_abs_diff(dec.predicted_u_next.coords(), Vec{1.0, 0.0, 0.0}) <= 1e-15);
  CHECK(dec.step_length == 0.0);

  auto res = verify_step(x, x, dec);
  CHECK(res.angle_defect == 0.0);
  CHECK(res.radius_defect == 0.0);
}

TEST_CASE("decompose_step raises when the margin assumption fails") {
  // strongly radial momentum with a large A makes 1 - A<c,u> negative
  Vec x{0.1, 0.0};
  Vec a{10.0, 0.0};
  CHECK_THROWS_AS(decompose_step(x, a, ones(2), 0.1), AssumptionViolated);
  CHECK_THROWS_AS(decompose_step(x, a, zeros(2), 0.1), NonPositiveDenominator);
}

TEST_CASE("verify_step sits at the floating-point floor for every scheme") {
  for (Variant v : {Variant::Sgd, Variant::SgdL2, Variant::SgdMomentum, Variant::Adam,
                    Variant::AdamW, Variant::AdamWoA, Variant::AdamWoAb, Variant::AdamWoAbc}) {
    ToyRun run(v, 0.05, 0.01, 6, 17u + static_cast<unsigned>(v));
    for (int k = 0; k < 50; ++k) {
      const Vec x_before = run.x;
      auto result = run.step();
      auto dec = decompose_step(x_before, result.a, result.b, run.spec.eta);
      auto res = verify_step(x_before, result.x_next, dec);
      CHECK(res.angle_defect <= 1e-12);
      CHECK(res.radius_defect <= 1e-12);
      // effective-direction tangency and the exact radial/tangential split
      const UnitVector u = split_radial(x_before).direction;
      CHECK(std::abs(dot(dec.c_perp, u.coords())) <= 1e-10 * (norm2(dec.c_perp) + 1e-300));
      Vec rebuilt = dec.c_perp;
      axpy(rebuilt, dec.radial_dot, u.coords());
      CHECK(max_abs_diff(rebuilt, dec.c) <= 1e-12 * (norm2(dec.c) + 1e-300));
      run.x = result.x_next;
    }
  }
}

TEST_CASE("arctan bound on the covered distance") {
  ToyRun run(Variant::Adam, 0.05, 0.001, 5, 23);
  for (int k = 0; k < 100; ++k) {
    const Vec x_before = run.x;
    auto result = run.step();
    auto dec = decompose_step(x_before, result.a, result.b, run.spec.eta);
    const double dist = angle_between(split_radial(x_before).direction,
                                      split_radial(result.x_next).direction);
    const double z = dec.step_length;
    CHECK(std::abs(dist - z) <= z * z * z / 3.0 + 1e-16);
    run.x = result.x_next;
  }
}

TEST_CASE("effective_lr_table closed forms") {
  UnitVector u({1.0, 0.0});
  CHECK(effective_lr_table(Variant::Sgd, 2.0, 0.1, 0.0, zeros(2), u, 0.0) ==
        doctest::Approx(0.025).epsilon(1e-15));
  CHECK(effective_lr_table(Variant::SgdL2, 2.0, 0.1, 0.1, zeros(2), u, 0.0) ==
        doctest::Approx(0.1 / (4.0 * 0.99)).epsilon(1e-14));
  // no radial momentum: the SGD-M row reduces to eta / r^2
  Vec c_tangent{0.0, 0.7};
  CHECK(effective_lr_table(Variant::SgdMomentum, 2.0, 0.1, 0.0, c_tangent, u, 0.0) ==
        doctest::Approx(0.025).epsilon(1e-14));
  CHECK_THROWS_AS(effective_lr_table(Variant::AdamGStar, 1.0, 0.1, 0.0, zeros(2), u, 1.0),
                  UnknownVariant);
}

TEST_CASE("table rows agree with decompose_step on live trajectories") {
  for (Variant v : {Variant::Sgd, Variant::SgdL2, Variant::SgdMomentum, Variant::Adam}) {
    ToyRun run(v, 0.04, v == Variant::SgdL2 ? 0.05 : 0.0, 5, 31u + static_cast<unsigned>(v));
    if (v == Variant::Adam) run.spec.epsilon = 0.0;
    for (int k = 0; k < 30; ++k) {
      const Vec x_before = run.x;
      auto result = run.step();
      auto dec = decompose_step(x_before, result.a, result.b, run.spec.eta);
      const double r = norm2(x_before);
      const double nu = nu_live(x_before, result.b);
      const double table = effective_lr_table(v, r, run.spec.eta, run.spec.lambda, dec.c,
                                              split_radial(x_before).direction, nu);
      CHECK(std::abs(table - dec.eta_eff) <= 1e-12 * dec.eta_eff);
      run.x = result.x_next;
    }
  }
}

TEST_CASE("split_momentum_history base cases") {
  Rng rng(37);
  UnitVector u0 = random_unit(rng, 4);
  Vec g0 = random_tangent(rng, u0, 0.8);

  auto split = split_momentum_history({2.0}, {g0}, 0.9, 0.1, {u0});
  CHECK(max_abs_diff(split.c_grad, g0) <= 1e-15);
  CHECK(max_abs_diff(split.c_l2, u0.coords()) <= 1e-15);

  // beta = 0 keeps only the current term at every k
  UnitVector u1 = random_unit(rng, 4);
  Vec g1 = random_tangent(rng, u1, 0.5);
  auto nosum = split_momentum_history({2.0, 1.5}, {g0, g1}, 0.0, 0.1, {u0, u1});
  CHECK(max_abs_diff(nosum.c_grad, g1) <= 1e-15);
  CHECK(max_abs_diff(nosum.c_l2, u1.coords()) <= 1e-15);

  CHECK_THROWS_AS(split_momentum_history({}, {}, 0.9, 0.1, {}), EmptyHistory);
}

TEST_CASE("momentum split reconstructs the recursive momentum") {
  // a_i = beta a_{i-1} + grad L(x_i) + lambda x_i, with x_i = r_i u_i and
  // grad L(x_i) = grad L(u_i)/r_i; check r_k a_k = c_grad + lambda r_k^2 c_l2.
  Rng rng(41);
  const double beta = 0.9;
  const double lambda = 0.05;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + rng.uniform_int(4);
    std::vector<double> radii;
    std::vector<Vec> grads;
    std::vector<UnitVector> dirs;
    Vec a = zeros(d);
    const std::size_t k = 3 + rng.uniform_int(5);
    for (std::size_t i = 0; i <= k; ++i) {
      UnitVector u = random_unit(rng, d);
      const double r = rng.uniform(0.5, 2.0);
      Vec sphere_grad = random_tangent(rng, u, rng.uniform(0.1, 1.0));
      radii.push_back(r);
      dirs.push_back(u);
      grads.push_back(sphere_grad);

      Vec full = scaled(sphere_grad, 1.0 / r);
      axpy(full, lambda * r, u.coords());
      a = scaled(a, beta);
      axpy(a, 1.0, full);
    }
    auto split = split_momentum_history(radii, grads, beta, lambda, dirs);
    Vec lhs = scaled(a, radii.back());
    Vec rhs = split.c_grad;
    axpy(rhs, lambda * radii.back() * radii.back(), split.c_l2);
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * (norm2(lhs) + 1.0));
  }
}

TEST_CASE("nu closed form base cases") {
  Rng rng(43);
  UnitVector u0 = random_unit(rng, 6);
  Vec g0 = random_tangent(rng, u0, 0.7);
  const double r0 = 1.4;
  const double lambda = 0.01;

  SphereHistory h;
  h.radii = {r0};
  h.sphere_grads = {g0};
  h.directions = {u0};

  Vec term = g0;
  axpy(term, lambda * r0 * r0, u0.coords());
  const double expect = norm2(term) / std::sqrt(6.0);
  CHECK(nu_closed_form(NuVariant::Adam, h, 0.9, 0.999, lambda, 0) ==
        doctest::Approx(expect).epsilon(1e-14));
  CHECK(nu_closed_form(NuVariant::WoAbc, h, 0.9, 0.999, lambda, 0) ==
        doctest::Approx(expect).epsilon(1e-14));

  // zero gradients and lambda = 0 give nu = 0
  SphereHistory zero;
  zero.radii = {1.0, 1.0};
  zero.sphere_grads = {zeros(6), zeros(6)};
  zero.directions = {u0, u0};
  CHECK(nu_closed_form(NuVariant::Adam, zero, 0.9, 0.999, 0.0, 1) == 0.0);

  CHECK_THROWS_AS(nu_closed_form(NuVariant::Adam, SphereHistory{}, 0.9, 0.999, 0.0, 0),
                  EmptyHistory);
}

TEST_CASE("nu closed form collapses to a geometric series at constant radius") {
  Rng rng(47);
  const std::size_t d = 5;
  const double g_norm = 0.6;
  const double beta1 = 0.9, beta2 = 0.99;
  SphereHistory h;
  for (int i = 0; i < 12; ++i) {
    UnitVector u = random_unit(rng, d);
    h.radii.push_back(1.0);
    h.directions.push_back(u);
    h.sphere_grads.push_back(random_tangent(rng, u, g_norm));
  }
  // constant radius and constant gradient norm: the sum telescopes and
  // nu_k = d^{-1/2} (1-beta1^{k+1})/(1-beta1) g
  for (std::size_t k : {std::size_t(0), std::size_t(5), std::size_t(11)}) {
    const double bc1 = (1.0 - std::pow(beta1, static_cast<double>(k + 1))) / (1.0 - beta1);
    const double expect = bc1 * g_norm / std::sqrt(static_cast<double>(d));
    CHECK(nu_closed_form(NuVariant::Adam, h, beta1, beta2, 0.0, k) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("nu closed forms track the live scheduling factor") {
  ToyRun adam(Variant::Adam, 0.03, 0.01, 5, 53, 0.0);
  for (int k = 0; k < 100; ++k) {
    const Vec x_before = adam.x;
    auto result = adam.step();
    const double live = nu_live(x_before, result.b);
    const double closed =
        nu_closed_form(NuVariant::Adam, adam.history, adam.spec.beta1, adam.spec.beta2,
                       adam.spec.lambda, adam.history.size() - 1);
    CHECK(std::abs(closed - live) <= 1e-8 * live);
    adam.x = result.x_next;
  }

  ToyRun abc(Variant::AdamWoAbc, 0.03, 0.01, 5, 59, 0.0);
  for (int k = 0; k < 100; ++k) {
    const Vec x_before = abc.x;
    auto result = abc.step();
    const double live = nu_live(x_before, result.b);
    const double closed =
        nu_closed_form(NuVariant::WoAbc, abc.history, abc.spec.beta1, abc.spec.beta2,
                       abc.spec.lambda, abc.history.size() - 1);
    CHECK(std::abs(closed - live) <= 1e-8 * live);
    abc.x = result.x_next;
  }
}

TEST_CASE("wo_abc radial component is exactly lambda r^2") {
  ToyRun run(Variant::AdamWoAbc, 0.05, 0.002, 6, 61);
  for (int k = 0; k < 120; ++k) {
    const Vec x_before = run.x;
    auto result = run.step();
    auto dec = decompose_step(x_before, result.a, result.b, run.spec.eta);
    const double r_sq = dot(x_before, x_before);
    CHECK(std::abs(dec.radial_dot - run.spec.lambda * r_sq) <= 1e-10 * run.spec.lambda * r_sq);
    run.x = result.x_next;
  }
}

TEST_CASE("vector second moment norm identity") {
  ToyRun run(Variant::Adam, 0.04, 0.01, 5, 67);
  for (int k = 0; k < 100; ++k) run.x = run.step().x_next;

  double norm_sq = 0.0;
  for (double vi : run.state.second_moment) norm_sq += vi;  // || sqrt(v) ||^2 = sum v_i
  const double closed = vk_norm_sq_closed_form(run.full_grad_sq, run.spec.beta2);
  CHECK(std::abs(norm_sq - closed) <= 1e-10 * closed);
}

TEST_CASE("plain sgd radius recursion is exact") {
  ToyRun run(Variant::Sgd, 0.08, 0.0, 4, 71);
  for (int k = 0; k < 60; ++k) {
    const Vec x_before = run.x;
    const double r_sq = dot(x_before, x_before);
    auto result = run.step();
    const double sphere_grad_norm = norm2(run.history.sphere_grads.back());
    const double predicted =
        r_sq + run.spec.eta * run.spec.eta * sphere_grad_norm * sphere_grad_norm / r_sq;
    CHECK(dot(result.x_next, result.x_next) == doctest::Approx(predicted).epsilon(1e-13));
    run.x = result.x_next;
  }
}

TEST_CASE("monitor tracks running maxima and flags") {
  AssumptionMonitor monitor;
  Vec x{2.0, 0.0};
  auto rest = decompose_step(x, zeros(2), ones(2), 0.1);
  monitor_update(monitor, rest, 0.0);
  CHECK(monitor.max_a_dot == 0.0);
  CHECK(monitor.max_step == 0.0);
  CHECK_FALSE(monitor.flagged);

  Rng rng(73);
  UnitVector target = random_unit(rng, 2);
  auto [loss, grad] = toy_loss_and_grad(x, target);
  (void)loss;
  Vec mixed = grad;
  axpy(mixed, 0.5, x);  // inject a radial component
  auto dec = decompose_step(x, mixed, ones(2), 0.1);
  monitor_update(monitor, dec, 0.3);
  CHECK(monitor.max_a_dot == doctest::Approx(std::abs(dec.A * dec.radial_dot)));
  CHECK(monitor.max_taylor_var == 0.3);

  AssumptionMonitor strict;
  StepDecomposition fake{.c = zeros(2),
                         .c_perp = zeros(2),
                         .A = 2.0,
                         .eta_eff = 1.0,
                         .radial_dot = 0.6,
                         .predicted_u_next = UnitVector({1.0, 0.0}),
                         .predicted_radius_ratio = 1.0,
                         .step_length = 0.1};
  monitor_update(strict, fake, 0.0);
  CHECK(strict.flagged);
}
