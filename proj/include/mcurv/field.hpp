#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "mcurv/error.hpp"
#include "mcurv/minkowski.hpp"
#include "mcurv/problem.hpp"

namespace mcurv {

/// Point on a radial trajectory in flux form: w = r^{N-1} phi1(u').
struct RadialState {
  double r = 0.0;
  double u = 0.0;
  double w = 0.0;
};

struct FieldParams {
  ProblemSpec spec;
  double lambda = 0.0;
  double epsilon_slope = 0.0;

  FieldParams() = default;
  FieldParams(ProblemSpec s, double l) : spec(std::move(s)), lambda(l) {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::Malformed, "lambda must be >= 0");
  }

  double radial_power(double r) const { return std::pow(r, spec.dimension - 1); }

  /// u' recovered from the flux.
  double slope(double r, double w) const {
    double t = w / radial_power(r);
    if (epsilon_slope > 0.0) {
      const double cap = phi1(1.0 - epsilon_slope);
      t = std::clamp(t, -cap, cap);
    }
    return phi1_inv(t);
  }
};

struct FluxDerivative {
  double du = 0.0;
  double dw = 0.0;
};

/// (u, w)' = (phi1^{-1}(w / r^{N-1}), -lambda r^{N-1} f(r, u)), valid for r > 0.
inline FluxDerivative flux_rhs(const RadialState& state, const FieldParams& params) {
  const double p = params.radial_power(state.r);
  return {params.slope(state.r, state.w),
          -params.lambda * p * params.spec.eval_f(state.r, state.u)};
}

/// u'' written through the equivalent quasilinear form
///   -(r^{N-1} u')' = lambda r^{N-1} f(r,u) h(u') - (N-1) r^{N-2} u'^3.
inline double quasilinear_second_derivative(double r, double u, double du,
                                            const FieldParams& params) {
  const int N = params.spec.dimension;
  return -params.lambda * params.spec.eval_f(r, u) * h_factor(du) -
         (N - 1) * du * (1.0 - du * du) / r;
}

/// Taylor start at r_start for the ball (inner radius 0), where w / r^{N-1} is 0/0 at r = 0.
inline RadialState origin_startup(double d, const FieldParams& params, double r_start) {
  if (!(r_start > 0.0)) throw Error(ErrorCode::Domain, "origin_startup requires r_start > 0");
  if (params.spec.inner_radius != 0.0)
    throw Error(ErrorCode::Domain, "origin_startup applies only to the ball (inner radius 0)");
  const int N = params.spec.dimension;
  const double f0 = params.spec.eval_f(0.0, d);
  const double forcing = params.lambda * f0;
  return {r_start, d - forcing * r_start * r_start / (2.0 * N),
          -forcing * std::pow(r_start, N) / N};
}

}  // namespace mcurv
