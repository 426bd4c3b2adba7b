#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "mcurv/error.hpp"

namespace mcurv {

template <std::size_t Dim>
using Vec = std::array<double, Dim>;

/// Continuous extension of one accepted Dormand-Prince step (fourth order).
template <std::size_t Dim>
struct DenseSegment {
  double r0 = 0.0;
  double h = 0.0;
  std::array<Vec<Dim>, 5> c{};

  double end() const { return r0 + h; }

  Vec<Dim> operator()(double r) const {
    const double s = (r - r0) / h;
    const double s1 = 1.0 - s;
    Vec<Dim> y;
    for (std::size_t i = 0; i < Dim; ++i)
      y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
    return y;
  }
};

struct StepControl {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 0.0;  ///< absolute; StepSizeUnderflow below this
  double initial_step = 0.0;  ///< 0 selects automatically
  long max_steps = 5'000'000;
};

template <std::size_t Dim>
struct IntegrationEnd {
  double r = 0.0;
  Vec<Dim> y{};
  long accepted = 0;
  long rejected = 0;
  bool stopped_early = false;
};

namespace detail {

template <std::size_t Dim>
double error_norm(const Vec<Dim>& err, const Vec<Dim>& y0, const Vec<Dim>& y1,
                  const StepControl& ctl) {
  double acc = 0.0;
  for (std::size_t i = 0; i < Dim; ++i) {
    const double sk = ctl.abs_tol + ctl.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sk;
    acc += q * q;
  }
  return std::sqrt(acc / Dim);
}

template <std::size_t Dim, class Rhs>
double initial_step(Rhs& rhs, double r0, const Vec<Dim>& y0, const Vec<Dim>& f0, double dir_len,
                    const StepControl& ctl) {
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < Dim; ++i) {
    const double sk = ctl.abs_tol + ctl.rel_tol * std::abs(y0[i]);
    d0 += (y0[i] / sk) * (y0[i] / sk);
    d1 += (f0[i] / sk) * (f0[i] / sk);
  }
  d0 = std::sqrt(d0 / Dim);
  d1 = std::sqrt(d1 / Dim);
  double h0 = (d0 <= 1e-10 || d1 <= 1e-10) ? 1e-6 * dir_len : 0.01 * d0 / d1;
  h0 = std::min({h0, ctl.max_step, dir_len});
  Vec<Dim> y1;
  for (std::size_t i = 0; i < Dim; ++i) y1[i] = y0[i] + h0 * f0[i];
  const Vec<Dim> f1 = rhs(r0 + h0, y1);
  double d2 = 0.0;
  for (std::size_t i = 0; i < Dim; ++i) {
    const double sk = ctl.abs_tol + ctl.rel_tol * std::abs(y0[i]);
    d2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
  }
  d2 = std::sqrt(d2 / Dim) / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, ctl.max_step, dir_len});
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of y' = rhs(r, y) from r0 to r_end (> r0).
/// Steps never straddle a breakpoint; the right-hand side is re-evaluated just past each
/// one. `on_step(segment)` sees every accepted step and may return false to stop.
template <std::size_t Dim, class Rhs, class OnStep>
IntegrationEnd<Dim> dopri5(Rhs&& rhs, double r0, Vec<Dim> y0, double r_end,
                           const StepControl& ctl, std::span<const double> breakpoints,
                           OnStep&& on_step) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  IntegrationEnd<Dim> out;
  out.r = r0;
  out.y = y0;
  if (!(r_end > r0)) return out;

  std::size_t next_bp = 0;
  auto skip_passed = [&](double r) {
    while (next_bp < breakpoints.size() && breakpoints[next_bp] <= r) ++next_bp;
  };
  skip_passed(r0);

  double r = r0;
  Vec<Dim> y = y0;
  Vec<Dim> k1 = rhs(r, y);
  double h = ctl.initial_step > 0.0 ? ctl.initial_step
                                    : detail::initial_step<Dim>(rhs, r, y, k1, r_end - r0, ctl);
  bool last_rejected = false;
  Vec<Dim> yt, k2, k3, k4, k5, k6, k7, y1, err;

  while (r < r_end) {
    if (out.accepted + out.rejected >= ctl.max_steps)
      throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted before reaching r_end");
    const double stop = next_bp < breakpoints.size() ? std::min(breakpoints[next_bp], r_end) : r_end;
    h = std::min(h, ctl.max_step);
    bool hits_stop = false;
    if (r + h >= stop || r + 1.01 * h >= stop) {
      h = stop - r;
      hits_stop = true;
    }
    if (h < ctl.min_step && !hits_stop)
      throw Error(ErrorCode::StepSizeUnderflow,
                  "step size fell below the minimum near r = " + std::to_string(r));

    for (std::size_t i = 0; i < Dim; ++i) yt[i] = y[i] + h * a21 * k1[i];
    k2 = rhs(r + c2 * h, yt);
    for (std::size_t i = 0; i < Dim; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    k3 = rhs(r + c3 * h, yt);
    for (std::size_t i = 0; i < Dim; ++i)
      yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = rhs(r + c4 * h, yt);
    for (std::size_t i = 0; i < Dim; ++i)
      yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = rhs(r + c5 * h, yt);
    for (std::size_t i = 0; i < Dim; ++i)
      yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    const double r_new = hits_stop ? stop : r + h;
    k6 = rhs(r + h, yt);
    for (std::size_t i = 0; i < Dim; ++i)
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    k7 = rhs(r_new, y1);
    for (std::size_t i = 0; i < Dim; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double en = detail::error_norm<Dim>(err, y, y1, ctl);

    if (!(en <= 1.0)) {
      if (!std::isfinite(en)) {
        h *= 0.1;
      } else {
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      }
      last_rejected = true;
      ++out.rejected;
      if (h < ctl.min_step)
        throw Error(ErrorCode::StepSizeUnderflow,
                    "step size fell below the minimum near r = " + std::to_string(r));
      continue;
    }

    DenseSegment<Dim> seg;
    seg.r0 = r;
    seg.h = r_new - r;
    for (std::size_t i = 0; i < Dim; ++i) {
      const double ydiff = y1[i] - y[i];
      const double bspl = h * k1[i] - ydiff;
      seg.c[0][i] = y[i];
      seg.c[1][i] = ydiff;
      seg.c[2][i] = bspl;
      seg.c[3][i] = ydiff - h * k7[i] - bspl;
      seg.c[4][i] =
          h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
    ++out.accepted;
    r = r_new;
    y = y1;
    k1 = k7;
    double grow = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
    if (last_rejected) grow = std::min(grow, 1.0);
    last_rejected = false;
    const double h_used = h;
    h = h_used * grow;
    if (hits_stop && next_bp < breakpoints.size() && stop == breakpoints[next_bp]) {
      skip_passed(r);
      if (r < r_end) k1 = rhs(std::nextafter(r, r_end), y);
    }
    out.r = r;
    out.y = y;
    if (!on_step(static_cast<const DenseSegment<Dim>&>(seg))) {
      out.stopped_early = true;
      return out;
    }
  }
  return out;
}

}  // namespace mcurv
