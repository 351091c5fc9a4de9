#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sphereopt/rng.hpp"
#include "sphereopt/sphere_geometry.hpp"

using namespace sphereopt;

namespace {

UnitVector random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  for (auto& c : v) c = rng.normal();
  return split_radial(v).direction;
}

// Random tangent at u with the given length.
Vec random_tangent(Rng& rng, const UnitVector& u, double length) {
  for (;;) {
    Vec v(u.dim());
    for (auto& c : v) c = rng.normal();
    Vec t = tangential_part(v, u);
    const double n = norm2(t);
    if (n > 1e-8) return scaled(t, length / n);
  }
}

}  // namespace

TEST_CASE("split_radial basic cases") {
  auto s = split_radial({3.0, 4.0});
  CHECK(s.radius == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(s.direction[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(s.direction[1] == doctest::Approx(0.8).epsilon(1e-14));

  auto id = split_radial({1.0, 0.0, 0.0});
  CHECK(id.radius == 1.0);
  CHECK(id.direction[0] == 1.0);

  CHECK_THROWS_AS(split_radial({0.0, 0.0}), ZeroVector);
}

TEST_CASE("split reconstructs the original vector") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    Vec x(5);
    for (auto& c : x) c = rng.uniform(-3.0, 3.0);
    if (norm2(x) < 1e-6) continue;
    auto s = split_radial(x);
    Vec back = scaled(s.direction.coords(), s.radius);
    CHECK(max_abs_diff(back, x) <= 1e-12 * norm2(x));
  }
}

TEST_CASE("unit vector renormalization policy") {
  // Small drift is renormalized; large deviation rejected.
  UnitVector u({1.0 + 1e-8, 0.0});
  CHECK(norm2(u.coords()) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(UnitVector({1.1, 0.0}), NotUnit);
  CHECK_THROWS_AS(UnitVector(Vec{1.0}), DimensionMismatch);
}

TEST_CASE("tangential_part") {
  UnitVector e1({1.0, 0.0});
  Vec t = tangential_part({1.0, 1.0}, e1);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == 1.0);

  Vec zero = tangential_part(e1.coords(), e1);
  CHECK(norm2(zero) <= 1e-15);

  UnitVector e3({0.0, 0.0, 1.0});
  Vec same = tangential_part({2.0, 3.0, 0.0}, e3);
  CHECK(same == Vec{2.0, 3.0, 0.0});

  CHECK_THROWS_AS(tangential_part({1.0, 2.0, 3.0}, e1), DimensionMismatch);
}

TEST_CASE("exp_map quarter circle and identity") {
  UnitVector u({1.0, 0.0, 0.0});
  auto q = exp_map(u, {0.0, std::numbers::pi / 2, 0.0});
  CHECK(q[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(1.0).epsilon(1e-14));

  auto same = exp_map(u, {0.0, 0.0, 0.0});
  CHECK(same.coords() == u.coords());

  // Near antipode: cos/sin evaluated directly as the oracle.
  UnitVector e1({1.0, 0.0});
  const double len = std::numbers::pi - 1e-6;
  auto near = exp_map(e1, {0.0, len});
  CHECK(near[0] == doctest::Approx(std::cos(len)).epsilon(1e-12));
  CHECK(near[1] == doctest::Approx(std::sin(len)).epsilon(1e-9));

  CHECK_THROWS_AS(exp_map(e1, {0.0, 3.5}), StepTooLarge);
  CHECK_THROWS_AS(exp_map(e1, {1.0, 1.0}), NotTangent);
}

TEST_CASE("geodesic_distance basic cases") {
  UnitVector e1({1.0, 0.0});
  UnitVector e2({0.0, 1.0});
  UnitVector m1({-1.0, 0.0});
  CHECK(geodesic_distance(e1, e2) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));
  CHECK(geodesic_distance(e1, e1) == 0.0);
  CHECK(geodesic_distance(e1, m1) == doctest::Approx(std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("exp_map properties over random draws") {
  Rng rng(202);
  double worst_norm = 0.0;
  double worst_dist = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t d = 2 + rng.uniform_int(6);
    UnitVector u = random_unit(rng, d);
    const double len = rng.uniform(1e-3, std::numbers::pi - 1e-3);
    Vec w = random_tangent(rng, u, len);
    UnitVector out = exp_map(u, w);
    worst_norm = std::max(worst_norm, std::abs(norm2(out.coords()) - 1.0));
    worst_dist = std::max(worst_dist, std::abs(geodesic_distance(u, out) - len));
  }
  CHECK(worst_norm <= 1e-12);
  CHECK(worst_dist <= 1e-10);
}

TEST_CASE("angle_between matches arccos form away from the floor") {
  Rng rng(303);
  for (int t = 0; t < 2000; ++t) {
    UnitVector u = random_unit(rng, 4);
    UnitVector v = random_unit(rng, 4);
    CHECK(std::abs(angle_between(u, v) - geodesic_distance(u, v)) <= 1e-9);
  }
  // And it resolves tiny angles that arccos cannot.
  UnitVector a({1.0, 0.0});
  UnitVector b = exp_map(a, {0.0, 1e-10});
  CHECK(angle_between(a, b) == doctest::Approx(1e-10).epsilon(1e-6));
}

TEST_CASE("transport examples") {
  UnitVector e1({1.0, 0.0, 0.0});
  UnitVector e2({0.0, 1.0, 0.0});

  Vec r = transport(e1, e2, {0.0, 1.0, 0.0});
  CHECK(r[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(r[1]) <= 1e-15);

  Vec zero = transport(e1, e2, e1.coords());
  CHECK(norm2(zero) <= 1e-15);

  Vec same = transport(e1, e1, {0.0, 1.0, 0.0});
  CHECK(same == Vec{0.0, 1.0, 0.0});
}

TEST_CASE("transport properties in the moving plane") {
  Rng rng(404);
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 3 + rng.uniform_int(5);
    UnitVector u_prev = random_unit(rng, d);
    Vec w = random_tangent(rng, u_prev, rng.uniform(1e-3, 1.0));
    UnitVector u_next = exp_map(u_prev, w);

    // Tangent at u_prev inside span(u_prev, u_next): a = alpha * w_hat.
    Vec a = scaled(w, rng.uniform(0.1, 2.0) / norm2(w));
    Vec ta = transport(u_prev, u_next, a);
    CHECK(std::abs(dot(ta, u_next.coords())) <= 1e-12 * norm2(a));
    CHECK(std::abs(norm2(ta) - norm2(a)) <= 1e-12 * norm2(a));
  }
}

TEST_CASE("transport is linear and drops the radial component") {
  Rng rng(505);
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 3 + rng.uniform_int(4);
    UnitVector up = random_unit(rng, d);
    UnitVector un = random_unit(rng, d);
    Vec a(d), b(d);
    for (auto& c : a) c = rng.uniform(-2.0, 2.0);
    for (auto& c : b) c = rng.uniform(-2.0, 2.0);
    const double alpha = rng.uniform(-2.0, 2.0);
    const double beta = rng.uniform(-2.0, 2.0);

    Vec lhs = transport(up, un, add(scaled(a, alpha), scaled(b, beta)));
    Vec rhs = add(scaled(transport(up, un, a), alpha), scaled(transport(up, un, b), beta));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * (norm2(lhs) + 1.0));

    // T(a - lambda*u_prev) = T(a): the radial part is not transported.
    const double lambda = rng.uniform(-3.0, 3.0);
    Vec shifted = transport(up, un, sub(a, scaled(up.coords(), lambda)));
    Vec plain = transport(up, un, a);
    CHECK(max_abs_diff(shifted, plain) <= 1e-12 * (norm2(plain) + 1.0));
  }
}

TEST_CASE("rt_transform examples") {
  Vec x_prev = {2.0, 0.0, 0.0};
  Vec x_next = {0.0, 3.0, 0.0};
  Vec r = rt_transform(x_prev, x_next, {0.0, 1.0, 0.0});
  CHECK(r[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(r[1]) <= 1e-15);

  Vec a = {0.3, -0.7, 0.1};
  Vec same = rt_transform(x_prev, x_prev, tangential_part(a, split_radial(x_prev).direction));
  Vec expect = tangential_part(a, split_radial(x_prev).direction);
  CHECK(max_abs_diff(same, expect) <= 1e-15);

  Vec radial = rt_transform(x_prev, x_next, {1.0, 0.0, 0.0});
  CHECK(norm2(radial) <= 1e-15);

  CHECK_THROWS_AS(rt_transform({0.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}), ZeroVector);
}

TEST_CASE("rt_transform equals scaled transport") {
  Rng rng(606);
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 3 + rng.uniform_int(4);
    Vec xp(d), xn(d), a(d);
    for (auto& c : xp) c = rng.uniform(-2.0, 2.0);
    for (auto& c : xn) c = rng.uniform(-2.0, 2.0);
    for (auto& c : a) c = rng.uniform(-2.0, 2.0);
    if (norm2(xp) < 1e-3 || norm2(xn) < 1e-3) continue;

    auto sp = split_radial(xp);
    auto sn = split_radial(xn);
    Vec rt = rt_transform(xp, xn, a);
    Vec ref = scaled(transport(sp.direction, sn.direction, a), sp.radius / sn.radius);
    CHECK(max_abs_diff(rt, ref) <= 1e-12 * (norm2(ref) + 1.0));
  }
}
