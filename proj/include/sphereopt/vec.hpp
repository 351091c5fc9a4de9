#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sphereopt/errors.hpp"

namespace sphereopt {

using Vec = std::vector<double>;

inline void check_same_dim(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionMismatch();
}

inline double dot(const Vec& a, const Vec& b) {
  check_same_dim(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec scaled(const Vec& a, double s) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

inline Vec add(const Vec& a, const Vec& b) {
  check_same_dim(a, b);
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
  check_same_dim(a, b);
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

// r += s * a
inline void axpy(Vec& r, double s, const Vec& a) {
  check_same_dim(r, a);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += s * a[i];
}

inline Vec hadamard(const Vec& a, const Vec& b) {
  check_same_dim(a, b);
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

// Elementwise a / b; every b[i] must be > 0.
inline Vec hadamard_div(const Vec& a, const Vec& b) {
  check_same_dim(a, b);
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(b[i] > 0.0)) throw NonPositiveDenominator();
    r[i] = a[i] / b[i];
  }
  return r;
}

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline Vec ones(std::size_t d) { return Vec(d, 1.0); }

inline Vec basis(std::size_t d, std::size_t i) {
  Vec r(d, 0.0);
  r[i] = 1.0;
  return r;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  check_same_dim(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace sphereopt
