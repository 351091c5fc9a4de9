#include "sphereopt/sphere_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sphereopt {

namespace {
constexpr double kExactUnitTol = 1e-12;
constexpr double kRenormalizableTol = 1e-6;

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }
}  // namespace

UnitVector::UnitVector(Vec coords) : coords_(std::move(coords)) {
  if (coords_.size() < 2) throw DimensionMismatch("UnitVector requires d >= 2");
  const double n = norm2(coords_);
  const double dev = std::abs(n - 1.0);
  if (dev <= kExactUnitTol) return;
  if (dev <= kRenormalizableTol) {
    for (auto& c : coords_) c /= n;
    return;
  }
  throw NotUnit("UnitVector norm deviates from 1 by " + std::to_string(dev));
}

RadialSplit split_radial(const Vec& x) {
  if (x.size() < 2) throw DimensionMismatch("split_radial requires d >= 2");
  const double r = norm2(x);
  if (r == 0.0) throw ZeroVector("split_radial: zero parameter group");
  return RadialSplit{r, UnitVector(scaled(x, 1.0 / r))};
}

Vec tangential_part(const Vec& q, const UnitVector& u) {
  check_same_dim(q, u.coords());
  Vec r = q;
  axpy(r, -dot(q, u.coords()), u.coords());
  return r;
}

UnitVector exp_map(const UnitVector& u, const Vec& w) {
  check_same_dim(w, u.coords());
  const double wn = norm2(w);
  if (wn == 0.0) return u;
  if (std::abs(dot(w, u.coords())) > 1e-10 * wn)
    throw NotTangent("exp_map: velocity is not tangent at u");
  if (wn >= std::numbers::pi) throw StepTooLarge();
  Vec r = scaled(u.coords(), std::cos(wn));
  axpy(r, std::sin(wn) / wn, w);
  return UnitVector(std::move(r));
}

double geodesic_distance(const UnitVector& u1, const UnitVector& u2) {
  return std::acos(clamp_unit(dot(u1.coords(), u2.coords())));
}

double angle_between(const UnitVector& u1, const UnitVector& u2) {
  const double half_chord = 0.5 * norm2(sub(u1.coords(), u2.coords()));
  if (half_chord >= 1.0) return std::numbers::pi;
  // Antipodal-ish points: fall back to arccos, which is accurate there.
  if (half_chord > 0.7) return geodesic_distance(u1, u2);
  return 2.0 * std::asin(half_chord);
}

Vec transport(const UnitVector& u_prev, const UnitVector& u_next, const Vec& a) {
  check_same_dim(a, u_prev.coords());
  check_same_dim(a, u_next.coords());
  const double cos_angle = dot(u_prev.coords(), u_next.coords());
  Vec r = scaled(a, cos_angle);
  axpy(r, -dot(a, u_next.coords()), u_prev.coords());
  return r;
}

Vec rt_transform(const Vec& x_prev, const Vec& x_next, const Vec& a) {
  check_same_dim(a, x_prev);
  check_same_dim(a, x_next);
  const double next_sq = dot(x_next, x_next);
  if (next_sq == 0.0 || dot(x_prev, x_prev) == 0.0)
    throw ZeroVector("rt_transform: zero parameter vector");
  Vec r = scaled(a, dot(x_next, x_prev) / next_sq);
  axpy(r, -dot(x_next, a) / next_sq, x_prev);
  return r;
}

}  // namespace sphereopt
