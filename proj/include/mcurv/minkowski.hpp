#pragma once

#include <cmath>

#include "mcurv/error.hpp"

namespace mcurv {

/// One-dimensional Minkowski curvature map s / sqrt(1 - s^2), defined on (-1, 1).
inline double phi1(double s) {
  if (!(std::abs(s) < 1.0)) throw Error(ErrorCode::Domain, "phi1 requires |s| < 1");
  return s / std::sqrt((1.0 - s) * (1.0 + s));
}

/// Inverse of phi1; total on the real line with range (-1, 1).
inline double phi1_inv(double t) {
  if (std::isinf(t)) return t > 0 ? 1.0 : -1.0;
  const double a = std::abs(t);
  // 1/sqrt(1 + t^-2) keeps full precision for large |t|
  const double v = a > 1.0 ? 1.0 / std::sqrt(1.0 + 1.0 / (a * a)) : a / std::sqrt(1.0 + a * a);
  return std::copysign(v, t);
}

/// (1 - y^2)^{3/2} on |y| <= 1, zero outside.
inline double h_factor(double y) {
  if (std::abs(y) > 1.0) return 0.0;
  const double q = (1.0 - y) * (1.0 + y);
  return q * std::sqrt(q);
}

}  // namespace mcurv
