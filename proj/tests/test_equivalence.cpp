#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sphereopt/equivalence.hpp"
#include "sphereopt/rng.hpp"
#include "sphereopt/spherical_lens.hpp"

using namespace sphereopt;

namespace {

UnitVector random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  for (auto& c : v) c = rng.normal();
  return split_radial(v).direction;
}

}  // namespace

TEST_CASE("sgd_equivalent_adamg values and structure") {
  auto m = sgd_equivalent_adamg(0.1, 0.1, 1.0);
  CHECK(m.beta == doctest::Approx(0.96059601).epsilon(1e-12));
  CHECK(m.eta_tilde * m.eta_tilde * 2.0 * m.beta == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.v0 * 2.0 * 0.1 * 0.1 * std::sqrt(m.beta) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.v0 == doctest::Approx(51.0152025).epsilon(1e-8));

  // lambda -> 0+: beta -> 1 and v0 -> r0^4 / (2 eta^2)
  auto tiny = sgd_equivalent_adamg(0.1, 1e-9, 1.5);
  CHECK(tiny.beta == doctest::Approx(1.0).epsilon(1e-8));
  const double r0_4 = 1.5 * 1.5 * 1.5 * 1.5;
  CHECK(tiny.v0 == doctest::Approx(r0_4 / (2.0 * 0.01)).epsilon(1e-7));

  CHECK_THROWS_AS(sgd_equivalent_adamg(1.0, 1.0, 1.0), InvalidHyperparameters);
  CHECK_THROWS_AS(sgd_equivalent_adamg(0.1, 0.0, 1.0), InvalidHyperparameters);
}

TEST_CASE("explr_schedule") {
  CHECK(explr_schedule(0.1, 0.1, 0) == doctest::Approx(0.1 / 0.99).epsilon(1e-14));
  for (long k : {0L, 3L, 10L}) CHECK(explr_schedule(0.1, 0.0, k) == 0.1);
  for (long k : {0L, 1L, 5L, 20L}) {
    const double ratio = explr_schedule(0.05, 0.01, k + 1) / explr_schedule(0.05, 0.01, k);
    CHECK(ratio == doctest::Approx(std::pow(1.0 - 0.05 * 0.01, -2.0)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(explr_schedule(2.0, 0.5, 0), InvalidHyperparameters);
}

TEST_CASE("sgd radius closed form vs exact recursion") {
  // zero gradients: both forms keep r^2 = r0^2 exactly
  std::vector<double> etas(10, 0.1), zeros_hist(10, 0.0);
  CHECK(sgd_radius_closed_form(1.3, etas, zeros_hist) == doctest::Approx(1.69).epsilon(1e-15));
  CHECK(sgd_radius_exact_recursion(1.3, etas, zeros_hist) ==
        doctest::Approx(1.69).epsilon(1e-15));

  // one step: exact r1^2 = r0^2 + g^2/r0^2, closed sqrt(2g^2 + r0^4),
  // and the gap is quartic in g (shrinks ~16x when g halves)
  const double r0 = 1.1;
  auto residual = [r0](double g) {
    const double exact = sgd_radius_exact_recursion(r0, {1.0}, {g});
    const double closed = sgd_radius_closed_form(r0, {1.0}, {g});
    return std::abs(exact - closed);
  };
  const double g = 0.2;
  CHECK(sgd_radius_exact_recursion(r0, {1.0}, {g}) ==
        doctest::Approx(r0 * r0 + g * g / (r0 * r0)).epsilon(1e-15));
  const double shrink = residual(g) / residual(g / 2.0);
  CHECK(shrink == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("a scheme compared with itself never deviates") {
  Rng rng(101);
  UnitVector target = random_unit(rng, 6);
  ToyLossProvider loss(target);
  UnitVector u0 = random_unit(rng, 6);

  SchemeRun run;
  run.spec.variant = Variant::Adam;
  run.spec.eta = 0.02;
  run.spec.lambda = 0.01;
  run.r0 = 1.2;
  auto report = compare_trajectories(run, run, loss, {u0}, 50);
  CHECK(report.steps_compared == 50);
  CHECK(report.max_angle_deviation == 0.0);
}

TEST_CASE("L2 regularization is exactly an exponential learning-rate schedule") {
  Rng rng(103);
  UnitVector target = random_unit(rng, 8);
  ToyLossProvider loss(target);
  UnitVector u0 = random_unit(rng, 8);

  auto [reg, exp] = explr_pair(0.05, 0.01, 1.0);
  auto report = compare_trajectories(reg, exp, loss, {u0}, 200);
  CHECK(report.max_angle_deviation <= 1e-10);

  auto check = sufficient_condition_check(reg, exp, loss, {u0}, 100);
  CHECK(check.max_eta_eff_diff <= 1e-12);
  CHECK(check.max_c_perp_diff <= 1e-12);
  CHECK(check.max_angle_deviation <= 1e-10);

  // the check is not vacuous: a merely order-2-equivalent pair shows
  // nonzero effective-quantity gaps
  auto [sgd, adamg] = sgd_adamg_pair(0.05, 0.01, 1.0);
  auto loose = sufficient_condition_check(sgd, adamg, loss, {u0}, 50);
  CHECK(loose.max_eta_eff_diff > 1e-12);
}

TEST_CASE("exponential-lr equivalence holds on the full-batch mlp") {
  NormalizedMlpConfig cfg{{2, 6, 2}, 0.0, false};
  NormalizedMlp mlp(cfg);
  Rng rng(107);
  MlpParams params = mlp.init_params(rng);
  Dataset data = make_synthetic_dataset(DatasetKind::TwoGaussians, 64, 11);

  std::vector<UnitVector> u0;
  for (const Vec* g : NormalizedMlp::invariant_groups(params))
    u0.push_back(split_radial(*g).direction);
  MlpLossProvider loss(std::move(mlp), std::move(params), full_batch(data));

  auto [reg, exp] = explr_pair(0.05, 0.01, 1.0);
  auto report = compare_trajectories(reg, exp, loss, u0, 60);
  CHECK(report.max_angle_deviation <= 1e-10);
}

TEST_CASE("adamg_star closed-form effective learning rate matches the live one") {
  Rng rng(109);
  const std::size_t d = 7;
  UnitVector target = random_unit(rng, d);

  SchemeSpec spec;
  spec.variant = Variant::AdamGStar;
  spec.eta = 0.5;
  spec.beta2 = 0.97;
  spec.v0 = 3.0;
  auto state = init_state(spec, d);

  Vec x = random_unit(rng, d).coords();
  std::vector<double> grad_norms;
  for (int k = 0; k < 80; ++k) {
    auto [loss, grad] = toy_loss_and_grad(x, target);
    (void)loss;
    const double live_v = state.scalar_second_moment;
    const double live_eta_eff = spec.eta / std::sqrt(live_v);

    double sum = std::pow(spec.beta2, static_cast<double>(k)) * spec.v0;
    for (std::size_t i = 0; i < grad_norms.size(); ++i)
      sum += std::pow(spec.beta2, static_cast<double>(k) - 1.0 - static_cast<double>(i)) *
             grad_norms[i] * grad_norms[i];
    const double closed = spec.eta / std::sqrt(sum);
    CHECK(std::abs(closed - live_eta_eff) <= 1e-8 * live_eta_eff);

    // the lens decomposition of the pre-normalization step agrees
    auto result = apply_step(spec, state, x, grad, spec.eta);
    auto dec = decompose_step(x, result.a, result.b, spec.eta);
    CHECK(std::abs(dec.eta_eff - live_eta_eff) <= 1e-12 * live_eta_eff);

    grad_norms.push_back(norm2(grad));  // ||grad L(u)||, x is unit
    x = result.x_next;
  }
}

TEST_CASE("order study: sgd-adamg deviations scale at order >= 2") {
  Rng rng(2024);
  const std::size_t d = 8;
  UnitVector target = random_unit(rng, d);
  UnitVector u0 = random_unit(rng, d);
  ToyLossProvider loss(target);

  auto res = order_study(
      4e-2, 3, 2.0, [](double eta) { return sgd_adamg_pair(eta, 0.01, 1.0); }, loss, {u0});
  REQUIRE(res.etas.size() == 4);
  CHECK(res.etas.back() == doctest::Approx(5e-3));
  CHECK(res.scaling_exponent >= 1.8);
  CHECK(res.max_deviations.back() <= 1e-2);

  // doubling lambda barely moves the exponent
  auto res2 = order_study(
      4e-2, 3, 2.0, [](double eta) { return sgd_adamg_pair(eta, 0.02, 1.0); }, loss, {u0});
  CHECK(std::abs(res2.scaling_exponent - res.scaling_exponent) <= 0.3);

  // an exactly equivalent pair leaves nothing to fit
  CHECK_THROWS_AS(order_study(
                      4e-2, 2, 1.0, [](double eta) { return explr_pair(eta, 0.01, 1.0); }, loss,
                      {u0}),
                  DegenerateDeviation);

  CHECK_THROWS_AS(order_study(
                      4e-2, 1, 1.0, [](double eta) { return sgd_adamg_pair(eta, 0.01, 1.0); },
                      loss, {u0}),
                  InvalidHyperparameters);
}
