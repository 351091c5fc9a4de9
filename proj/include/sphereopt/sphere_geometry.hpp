#pragma once

#include "sphereopt/vec.hpp"

namespace sphereopt {

// A point on the unit hypersphere S_{d-1}, d >= 2. Constructors renormalize
// when the norm deviates from 1 by more than 1e-12 (up to 1e-6); a larger
// deviation is rejected, which bounds silent drift over long trajectories.
class UnitVector {
 public:
  explicit UnitVector(Vec coords);

  const Vec& coords() const { return coords_; }
  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }

 private:
  Vec coords_;
};

// Split x = r * u with r = ||x|| and u on the sphere.
struct RadialSplit {
  double radius;
  UnitVector direction;
};

RadialSplit split_radial(const Vec& x);

// q minus its component along u; the result is orthogonal to u.
Vec tangential_part(const Vec& q, const UnitVector& u);

// Geodesic shooting along the great circle through u with velocity w.
// Requires <w,u> = 0 within 1e-10*||w|| and ||w|| < pi.
UnitVector exp_map(const UnitVector& u, const Vec& w);

// arccos of the clamped inner product, in [0, pi].
double geodesic_distance(const UnitVector& u1, const UnitVector& u2);

// Same mathematical quantity as geodesic_distance, evaluated through the
// chord 2*asin(||u1-u2||/2). Accurate near 0 where arccos loses ~8 digits;
// used wherever angles near the floating-point floor are compared.
double angle_between(const UnitVector& u1, const UnitVector& u2);

// In-plane rotation form of parallel transport from u_prev to u_next,
// applied verbatim to the whole space:
//   T(a) = <u_prev,u_next> a - <a,u_next> u_prev.
// T(u_prev) = 0 and T preserves norms of tangents in span(u_prev,u_next).
Vec transport(const UnitVector& u_prev, const UnitVector& u_next, const Vec& a);

// Rescale-and-transport in one scalar expression on raw parameters:
//   RT(a) = (<x_next,x_prev> a - <x_next,a> x_prev) / <x_next,x_next>.
// Equals (r_prev/r_next) * transport(u_prev, u_next, a).
Vec rt_transform(const Vec& x_prev, const Vec& x_next, const Vec& a);

}  // namespace sphereopt
