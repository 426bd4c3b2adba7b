#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mcurv/dopri5.hpp"
#include "mcurv/error.hpp"
#include "mcurv/field.hpp"
#include "mcurv/problem.hpp"

namespace mcurv {

struct IntegratorTolerances {
  double rel = 1e-10;
  double abs = 1e-12;
};

struct IntegratorOptions {
  IntegratorTolerances tol;
  double max_step_fraction = 1.0 / 32;  ///< of R - delta; keeps event sampling fine enough
  int event_samples = 8;                ///< dense-output probes per step for sign changes
  double event_tol_factor = 1e-10;      ///< event bisection width, times R
  double degeneracy_tol = 1e-6;         ///< |u'| at a node below this, times min(1, |d| / (R - delta))
  double min_step_factor = 1e-14;       ///< StepSizeUnderflow threshold, times R
};

enum class EventType { Node, Extremum };

struct Event {
  EventType type;
  double r;
  double u;
  double du;
};

/// Forward solution of the flux system on [delta, R] with its dense output and
/// located zeros of u (nodes) and of u' (extrema).
class Trajectory {
 public:
  int dimension = 3;
  double lambda = 0.0;
  double inner_radius = 0.0;
  double outer_radius = 1.0;
  double initial_value = 0.0;  ///< u(delta)
  RadialState start;           ///< first integrated state (r_start on the ball)
  RadialState end;
  std::vector<DenseSegment<2>> segments;
  std::vector<Event> events;
  bool degenerate = false;
  std::string degenerate_reason;
  double sup_abs_u = 0.0;
  double sup_abs_du = 0.0;

  double radial_power(double r) const { return std::pow(r, dimension - 1); }

  RadialState state_at(double r) const {
    if (r <= start.r) {
      // Taylor segment on [0, r_start] (ball) or the exact start on the annulus
      if (start.r <= inner_radius || start.r == 0.0) return start;
      const double q = r / start.r;
      return {r, initial_value + (start.u - initial_value) * q * q,
              start.w * std::pow(q, dimension)};
    }
    if (segments.empty() || r >= end.r) return end;
    auto it = std::upper_bound(segments.begin(), segments.end(), r,
                               [](double x, const DenseSegment<2>& s) { return x < s.r0; });
    const auto& seg = *(it - 1);
    const auto y = seg(r);
    return {r, y[0], y[1]};
  }

  double u(double r) const { return state_at(r).u; }
  double w(double r) const { return state_at(r).w; }

  double du(double r) const {
    if (r <= 0.0) return 0.0;
    if (r <= start.r && start.r > inner_radius && start.r > 0.0)
      return 2.0 * (start.u - initial_value) * r / (start.r * start.r);
    return phi1_inv(w(r) / radial_power(r));
  }

  double terminal() const { return end.u; }

  int node_count() const {
    return static_cast<int>(std::count_if(events.begin(), events.end(),
                                          [](const Event& e) { return e.type == EventType::Node; }));
  }

  /// Sample radii: every step boundary plus `per_step - 1` interior points.
  std::vector<double> sample_radii(int per_step = 4) const {
    std::vector<double> rs;
    rs.reserve(segments.size() * per_step + 2);
    if (start.r > inner_radius) rs.push_back(inner_radius);
    rs.push_back(start.r);
    for (const auto& s : segments)
      for (int j = 1; j <= per_step; ++j) rs.push_back(s.r0 + s.h * j / per_step);
    return rs;
  }

  /// CSV columns r,u,du,w.
  void write_csv(std::ostream& os, int per_step = 4) const {
    char buf[160];
    os << "r,u,du,w\n";
    for (double r : sample_radii(per_step)) {
      const auto st = state_at(r);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r, st.u, du(r), st.w);
      os << buf;
    }
  }
};

namespace detail {

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// Integrates the flux system from `initial` to R.
inline Trajectory integrate(const RadialState& initial, const FieldParams& params,
                            const IntegratorOptions& opt = {}, double initial_value_hint = NAN) {
  const ProblemSpec& spec = params.spec;
  const double R = spec.outer_radius;
  const double delta = spec.inner_radius;
  if (!(initial.r >= delta && initial.r < R))
    throw Error(ErrorCode::Domain, "initial radius must lie in [delta, R)");
  if (!(opt.tol.rel > 0.0 && opt.tol.abs > 0.0))
    throw Error(ErrorCode::Malformed, "integrator tolerances must be positive");
  if (initial.r == 0.0) throw Error(ErrorCode::Domain, "use origin_startup to leave r = 0");

  Trajectory traj;
  traj.dimension = spec.dimension;
  traj.lambda = params.lambda;
  traj.inner_radius = delta;
  traj.outer_radius = R;
  traj.initial_value = std::isnan(initial_value_hint) ? initial.u : initial_value_hint;
  traj.start = initial;
  traj.end = initial;
  traj.sup_abs_u = std::max(std::abs(initial.u), std::abs(traj.initial_value));
  traj.sup_abs_du = std::abs(params.slope(initial.r, initial.w));

  StepControl ctl;
  ctl.rel_tol = opt.tol.rel;
  ctl.abs_tol = opt.tol.abs;
  ctl.max_step = opt.max_step_fraction * (R - delta);
  ctl.min_step = opt.min_step_factor * R;

  std::vector<double> breakpoints;
  for (double b : spec.f.radial_breakpoints())
    if (b > initial.r && b < R) breakpoints.push_back(b);
  std::sort(breakpoints.begin(), breakpoints.end());

  auto rhs = [&params](double r, const Vec<2>& y) -> Vec<2> {
    const auto d = flux_rhs({r, y[0], y[1]}, params);
    return {d.du, d.dw};
  };

  const double event_width = opt.event_tol_factor * R;
  const double slope_floor =
      opt.degeneracy_tol * std::min(1.0, std::abs(traj.initial_value) / (R - delta));
  // last nonzero sign seen and where, for u and for w
  int su = detail::sign_of(initial.u), sw = detail::sign_of(initial.w);
  double ru = initial.r, rw = initial.r;

  auto locate = [&](double a, double b, int component) {
    auto value = [&](double r) {
      const auto st = traj.state_at(r);
      return component == 0 ? st.u : st.w;
    };
    const int sa = detail::sign_of(value(a));
    while (b - a > event_width) {
      const double m = 0.5 * (a + b);
      const int sm = detail::sign_of(value(m));
      if (sm == 0) return m;
      if (sm == sa) a = m; else b = m;
    }
    return 0.5 * (a + b);
  };

  auto on_step = [&](const DenseSegment<2>& seg) {
    traj.segments.push_back(seg);
    const auto y_end = seg(seg.end());
    traj.end = {seg.end(), y_end[0], y_end[1]};
    const int n = std::max(1, opt.event_samples);
    for (int j = 1; j <= n; ++j) {
      const double r = j == n ? seg.end() : seg.r0 + seg.h * j / n;
      const auto y = seg(r);
      const double slope = params.slope(r, y[1]);
      traj.sup_abs_u = std::max(traj.sup_abs_u, std::abs(y[0]));
      traj.sup_abs_du = std::max(traj.sup_abs_du, std::abs(slope));
      const int cu = detail::sign_of(y[0]);
      if (cu != 0) {
        if (su != 0 && cu != su) {
          const double rz = locate(ru, r, 0);
          const double dz = traj.du(rz);
          traj.events.push_back({EventType::Node, rz, 0.0, dz});
          if (std::abs(dz) < slope_floor) {
            traj.degenerate = true;
            traj.degenerate_reason = "node with vanishing slope at r = " + std::to_string(rz);
          }
        }
        su = cu;
        ru = r;
      }
      const int cw = detail::sign_of(y[1]);
      if (cw != 0) {
        if (sw != 0 && cw != sw) {
          const double re = locate(rw, r, 1);
          traj.events.push_back({EventType::Extremum, re, traj.u(re), 0.0});
        }
        sw = cw;
        rw = r;
      }
    }
    return true;
  };

  const auto fin = dopri5<2>(rhs, initial.r, Vec<2>{initial.u, initial.w}, R, ctl, breakpoints,
                             on_step);
  traj.end = {fin.r, fin.y[0], fin.y[1]};

  std::sort(traj.events.begin(), traj.events.end(),
            [](const Event& a, const Event& b) { return a.r < b.r; });
  for (std::size_t i = 0; i + 1 < traj.events.size(); ++i) {
    const auto& a = traj.events[i];
    const auto& b = traj.events[i + 1];
    if (a.type != b.type && b.r - a.r <= 2.0 * event_width) {
      traj.degenerate = true;
      traj.degenerate_reason = "u and u' vanish together near r = " + std::to_string(a.r);
    }
  }
  if (!(traj.sup_abs_du < 1.0)) {
    traj.degenerate = true;
    traj.degenerate_reason = "slope reached the light-cone bound |u'| = 1";
  }
  return traj;
}

struct NodalClassification {
  std::optional<NodalSignature> signature;
  std::string reason;          ///< why classification failed, empty on success
  std::vector<double> zeros;   ///< interior nodes tau_1 < ... < tau_{k-1}
  std::vector<double> extrema; ///< interior critical points

  bool degenerate() const { return !signature.has_value(); }
};

/// Classifies a trajectory whose terminal value vanishes (within zero_tol) into its
/// nodal class and checks that zeros and critical points interleave.
inline NodalClassification count_nodal_signature(const Trajectory& traj, double zero_tol) {
  const double R = traj.outer_radius;
  const double uR = traj.terminal();
  if (!(std::abs(uR) <= zero_tol))
    throw Error(ErrorCode::Domain, "trajectory terminal value exceeds the zero tolerance");

  NodalClassification out;
  if (traj.initial_value == 0.0) {
    out.reason = "trivial trajectory";
    return out;
  }
  if (traj.degenerate) {
    out.reason = traj.degenerate_reason;
    return out;
  }
  for (const auto& e : traj.events) {
    if (e.type == EventType::Node) {
      // a node displaced from R only by the terminal residual is the boundary zero itself
      const double slack = 2.0 * std::abs(uR) / std::max(std::abs(e.du), 1e-300) + 1e-9 * R;
      if (R - e.r <= slack) continue;
      out.zeros.push_back(e.r);
    } else if (e.r < R) {
      out.extrema.push_back(e.r);
    }
  }
  const int k = static_cast<int>(out.zeros.size()) + 1;
  const Sign nu = traj.initial_value > 0.0 ? Sign::Plus : Sign::Minus;

  // interleaving: no critical point on the first arch, exactly one on each later arch
  std::vector<double> bounds{traj.inner_radius};
  bounds.insert(bounds.end(), out.zeros.begin(), out.zeros.end());
  bounds.push_back(R);
  for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
    const auto cnt = std::count_if(out.extrema.begin(), out.extrema.end(), [&](double x) {
      return x > bounds[j] && x < bounds[j + 1];
    });
    const long expected = j == 0 ? 0 : 1;
    if (cnt != expected) {
      out.reason = "interleaving of zeros and critical points fails on arch " +
                   std::to_string(j + 1);
      return out;
    }
  }
  out.signature = NodalSignature(k, nu);
  return out;
}

}  // namespace mcurv
