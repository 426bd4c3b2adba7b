#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "mcurv/error.hpp"
#include "mcurv/field.hpp"
#include "mcurv/integrator.hpp"
#include "mcurv/problem.hpp"

namespace mcurv {

struct ShootingOptions {
  IntegratorOptions integrator;
  double r_start_factor = 1e-6;   ///< ball startup radius, times R
  double zero_tol_factor = 1e-9;  ///< |u(R)| acceptance, times max(1, |d|)
  int max_refine_iterations = 200;
  int workers = 1;

  double zero_tol(double d) const { return zero_tol_factor * std::max(1.0, std::abs(d)); }
};

struct ShootResult {
  double d = 0.0;
  double lambda = 0.0;
  double terminal = 0.0;
  int interior_zeros = 0;  ///< sign changes of u over (delta, R], terminal value ignored
  Trajectory trajectory;
};

/// Integrates (u, w) from u(delta) = d, w(delta) = 0 to R.
inline ShootResult shoot(double d, double lambda, const ProblemSpec& spec,
                         const ShootingOptions& opt = {}) {
  if (std::isfinite(spec.alpha) && !(std::abs(d) < spec.alpha))
    throw Error(ErrorCode::Domain, "shooting amplitude must satisfy |d| < alpha");
  FieldParams params(spec, lambda);
  RadialState initial{spec.inner_radius, d, 0.0};
  if (spec.inner_radius == 0.0)
    initial = origin_startup(d, params, opt.r_start_factor * spec.outer_radius);
  ShootResult out;
  out.d = d;
  out.lambda = lambda;
  out.trajectory = integrate(initial, params, opt.integrator, d);
  out.terminal = out.trajectory.terminal();
  out.interior_zeros = out.trajectory.node_count();
  return out;
}

/// One sample of a one-parameter shooting family (amplitude or lambda).
struct ShotSample {
  double param = 0.0;
  double terminal = 0.0;
  int zeros = 0;
  bool ok = false;
  std::string error;
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  double terminal_lo = 0.0;
  double terminal_hi = 0.0;
  int zeros_lo = 0;
  int zeros_hi = 0;
};

struct ScanResult {
  std::vector<Bracket> brackets;
  std::vector<ShotSample> samples;

  bool empty() const { return brackets.empty(); }
};

using ShotFunction = std::function<ShootResult(double)>;

/// Evaluates the family on a grid, in parallel when workers > 1; order follows the grid.
inline std::vector<ShotSample> sample_shots(const std::vector<double>& grid, const ShotFunction& fn,
                                            int workers = 1) {
  std::vector<ShotSample> out(grid.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i].param = grid[i];
      try {
        const auto s = fn(grid[i]);
        out[i].terminal = s.terminal;
        out[i].zeros = s.interior_zeros;
        out[i].ok = true;
      } catch (const Error& e) {
        out[i].error = e.what();
      }
    }
  };
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || grid.size() < 2 * w) {
    run(0, grid.size());
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (grid.size() + w - 1) / w;
  for (std::size_t b = 0; b < grid.size(); b += chunk)
    jobs.push_back(std::async(std::launch::async, run, b, std::min(grid.size(), b + chunk)));
  for (auto& j : jobs) j.get();
  return out;
}

/// Adjacent samples across which the shot passes from k-1 to k sign changes on (delta, R],
/// i.e. where u(R) crosses zero with k-1 interior zeros on the crossing side.
inline std::vector<Bracket> brackets_for(const std::vector<ShotSample>& samples, int k) {
  std::vector<Bracket> out;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    if (!a.ok || !b.ok) continue;
    const bool counts = (a.zeros == k - 1 && b.zeros == k) || (a.zeros == k && b.zeros == k - 1);
    if (counts && a.terminal * b.terminal < 0.0)
      out.push_back({a.param, b.param, a.terminal, b.terminal, a.zeros, b.zeros});
  }
  return out;
}

/// Safeguarded regula falsi (Illinois) on the signed terminal value inside a bracket.
/// The residual -s_k u(R) is continuous across the root and negative on the side with
/// k-1 sign changes, where s_k is the sign of the k-th arch.
inline ShootResult refine_bracket(const ShotFunction& fn, const Bracket& bracket,
                                  const NodalSignature& target, double zero_tol,
                                  int max_iterations = 200) {
  const double sk = to_double(target.last_arch());
  auto residual = [&](const ShootResult& s) { return -sk * s.terminal; };
  auto admissible = [&](const ShootResult& s) {
    return s.interior_zeros == target.k - 1 || s.interior_zeros == target.k;
  };

  double a = bracket.lo, b = bracket.hi;
  double ga = -sk * bracket.terminal_lo, gb = -sk * bracket.terminal_hi;
  if (!(ga * gb < 0.0)) throw Error(ErrorCode::BracketLost, "bracket endpoints share a sign");

  ShootResult best;
  bool have_best = false;
  int side = 0;
  double width_prev = std::abs(b - a);
  for (int it = 0; it < max_iterations; ++it) {
    double p = (a * gb - b * ga) / (gb - ga);
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!(p > lo && p < hi) || (it % 3 == 2 && std::abs(b - a) > 0.5 * width_prev))
      p = 0.5 * (a + b);
    if (it % 3 == 2) width_prev = std::abs(b - a);

    ShootResult s = fn(p);
    if (!admissible(s))
      throw Error(ErrorCode::BracketLost,
                  "zero count changed to " + std::to_string(s.interior_zeros) +
                      " inside the bracket at parameter " + std::to_string(p));
    const double g = residual(s);
    if (!have_best || std::abs(s.terminal) < std::abs(best.terminal)) {
      best = s;
      have_best = true;
    }
    if (std::abs(s.terminal) <= zero_tol) return s;
    if ((g < 0.0) == (ga < 0.0)) {
      a = p;
      ga = g;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = p;
      gb = g;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
    if (std::abs(b - a) <= 4e-16 * std::max({1.0, std::abs(a), std::abs(b)})) break;
  }
  if (have_best && std::abs(best.terminal) <= 10.0 * zero_tol) return best;
  throw Error(ErrorCode::BracketLost, "root refinement stalled before reaching the zero tolerance");
}

/// Discretized BVP solution with its nodal data and norms.
struct SolutionProfile {
  double lambda = 0.0;
  double d = 0.0;
  NodalSignature signature;
  std::vector<double> r, u, du;
  double sup_u = 0.0;
  double sup_du = 0.0;
  double c1_norm = 0.0;
  double terminal = 0.0;
  std::vector<double> zeros;
  std::vector<double> extrema;
  Trajectory trajectory;
};

/// Wraps an accepted shot: classifies it and enforces the a priori bounds.
inline SolutionProfile make_profile(const ShootResult& shot, const ProblemSpec& spec,
                                    const ShootingOptions& opt = {}) {
  const auto cls = count_nodal_signature(shot.trajectory, opt.zero_tol(shot.d));
  if (cls.degenerate())
    throw Error(ErrorCode::DegenerateSolution, "nodal classification failed: " + cls.reason);
  SolutionProfile p;
  p.lambda = shot.lambda;
  p.d = shot.d;
  p.signature = *cls.signature;
  p.terminal = shot.terminal;
  p.zeros = cls.zeros;
  p.extrema = cls.extrema;
  p.trajectory = shot.trajectory;
  p.sup_u = shot.trajectory.sup_abs_u;
  p.sup_du = shot.trajectory.sup_abs_du;
  for (double r : shot.trajectory.sample_radii()) {
    p.r.push_back(r);
    p.u.push_back(shot.trajectory.u(r));
    p.du.push_back(shot.trajectory.du(r));
    p.sup_u = std::max(p.sup_u, std::abs(p.u.back()));
    p.sup_du = std::max(p.sup_du, std::abs(p.du.back()));
  }
  p.c1_norm = p.sup_u + p.sup_du;
  if (!(p.sup_du < 1.0))
    throw Error(ErrorCode::BoundViolation, "solution violates sup|u'| < 1");
  if (!(p.sup_u < spec.span()))
    throw Error(ErrorCode::BoundViolation, "solution violates sup|u| < R - delta");
  return p;
}

/// Amplitude grid: geometric near zero, then uniform up to 0.999 min(alpha, R - delta).
inline std::vector<double> default_amplitude_grid(const ProblemSpec& spec, int points = 160,
                                                  double smallest = 1e-8) {
  const double dmax = 0.999 * std::min(spec.alpha, spec.span());
  const double knee = 0.05 * dmax;
  const int n_geo = points / 2;
  const int n_uni = points - n_geo;
  std::vector<double> g;
  g.reserve(points);
  const double lo = std::log(smallest * dmax), hi = std::log(knee);
  for (int i = 0; i < n_geo; ++i) g.push_back(std::exp(lo + (hi - lo) * i / n_geo));
  for (int i = 0; i < n_uni; ++i) g.push_back(knee + (dmax - knee) * (i + 1) / n_uni);
  return g;
}

/// Brackets of the amplitude map d -> u(R; d) at fixed lambda that enclose a solution
/// with the target signature. The grid is read as magnitudes and mirrored for nu = -.
inline ScanResult time_map_scan(double lambda, const ProblemSpec& spec,
                                const std::vector<double>& d_grid, const NodalSignature& target,
                                const ShootingOptions& opt = {}) {
  if (d_grid.size() < 32) throw Error(ErrorCode::Malformed, "amplitude grid needs >= 32 points");
  std::vector<double> grid;
  grid.reserve(d_grid.size());
  const double limit = std::isfinite(spec.alpha) ? spec.alpha : kInfinity;
  for (double g : d_grid) {
    if (!(std::abs(g) > 0.0 && std::abs(g) < limit))
      throw Error(ErrorCode::Malformed, "amplitude grid must lie in (0, alpha)");
    grid.push_back(to_double(target.nu) * std::abs(g));
  }
  std::sort(grid.begin(), grid.end());
  ShotFunction fn = [&](double d) { return shoot(d, lambda, spec, opt); };
  ScanResult res;
  res.samples = sample_shots(grid, fn, opt.workers);
  res.brackets = brackets_for(res.samples, target.k);
  return res;
}

/// Solves the BVP at fixed lambda inside an amplitude bracket.
inline SolutionProfile solve_bvp(double lambda, const ProblemSpec& spec,
                                 const NodalSignature& target, const Bracket& bracket,
                                 const ShootingOptions& opt = {}) {
  if (to_double(target.nu) * bracket.lo <= 0.0 || to_double(target.nu) * bracket.hi <= 0.0)
    throw Error(ErrorCode::Malformed, "bracket amplitudes must carry the sign of nu");
  ShotFunction fn = [&](double d) { return shoot(d, lambda, spec, opt); };
  const double tol = opt.zero_tol(std::max(std::abs(bracket.lo), std::abs(bracket.hi)));
  const auto shot = refine_bracket(fn, bracket, target, tol, opt.max_refine_iterations);
  auto profile = make_profile(shot, spec, opt);
  if (!(profile.signature == target))
    throw Error(ErrorCode::DegenerateSolution,
                "refined solution has signature " + profile.signature.str() + ", wanted " +
                    target.str());
  return profile;
}

/// Solves for lambda at a fixed amplitude d, scanning [lambda_lo, lambda_hi] for a bracket.
inline SolutionProfile solve_for_lambda(double d, const ProblemSpec& spec,
                                        const NodalSignature& target, double lambda_lo,
                                        double lambda_hi, const ShootingOptions& opt = {},
                                        int scan_points = 17) {
  if (to_double(target.nu) * d <= 0.0)
    throw Error(ErrorCode::Malformed, "amplitude must carry the sign of nu");
  if (!(lambda_lo > 0.0 && lambda_hi > lambda_lo))
    throw Error(ErrorCode::Malformed, "lambda window must satisfy 0 < lo < hi");
  ShotFunction fn = [&](double l) { return shoot(d, l, spec, opt); };
  std::vector<double> grid(scan_points);
  for (int i = 0; i < scan_points; ++i)
    grid[i] = lambda_lo + (lambda_hi - lambda_lo) * i / (scan_points - 1);
  const auto brackets = brackets_for(sample_shots(grid, fn, opt.workers), target.k);
  if (brackets.empty())
    throw Error(ErrorCode::MissingSolution,
                "no lambda bracket for signature " + target.str() + " in the window");
  const auto shot = refine_bracket(fn, brackets.front(), target, opt.zero_tol(d),
                                   opt.max_refine_iterations);
  auto profile = make_profile(shot, spec, opt);
  if (!(profile.signature == target))
    throw Error(ErrorCode::DegenerateSolution, "signature mismatch after lambda refinement");
  return profile;
}

struct SolveAllResult {
  std::vector<SolutionProfile> solutions;  ///< sorted by d
  std::vector<std::string> failures;
  ScanResult scan;
};

/// Scans the amplitude map and solves every bracket; all solutions are kept.
inline SolveAllResult solve_all(double lambda, const ProblemSpec& spec,
                                const NodalSignature& target, const std::vector<double>& d_grid,
                                const ShootingOptions& opt = {}) {
  SolveAllResult out;
  out.scan = time_map_scan(lambda, spec, d_grid, target, opt);
  for (const auto& b : out.scan.brackets) {
    try {
      auto p = solve_bvp(lambda, spec, target, b, opt);
      const bool duplicate = std::any_of(out.solutions.begin(), out.solutions.end(),
                                         [&](const auto& q) { return std::abs(q.d - p.d) < 1e-8; });
      if (!duplicate) out.solutions.push_back(std::move(p));
    } catch (const Error& e) {
      out.failures.push_back(e.what());
    }
  }
  std::sort(out.solutions.begin(), out.solutions.end(),
            [](const auto& a, const auto& b) { return a.d < b.d; });
  return out;
}

/// The first arch is strictly monotone: |u| decreases from delta to the first zero.
inline bool first_arch_check(const SolutionProfile& profile) {
  if (profile.d == 0.0 || profile.r.empty()) return false;
  const double s = to_double(profile.signature.nu);
  const double delta = profile.r.front();
  const double tau1 = profile.zeros.empty() ? profile.trajectory.outer_radius : profile.zeros.front();
  if (!(s * profile.d > 0.0)) return false;
  constexpr double tol = 1e-10;
  for (std::size_t i = 0; i < profile.r.size(); ++i) {
    const double r = profile.r[i];
    if (r > tau1) break;
    const double slope = s * profile.du[i];
    if (slope > tol) return false;
    if (r > delta && !(slope < 0.0)) return false;
  }
  return true;
}

/// Re-integrates an accepted profile through the quasilinear (u, u') form and returns
/// the sup-norm distance between the two routes on the profile grid.
inline double quasilinear_consistency(const SolutionProfile& profile, const ProblemSpec& spec,
                                      const IntegratorTolerances& tol = {}) {
  FieldParams params(spec, profile.lambda);
  const auto& tr = profile.trajectory;
  const double r0 = tr.start.r;
  auto rhs = [&](double r, const Vec<2>& y) -> Vec<2> {
    return {y[1], quasilinear_second_derivative(r, y[0], y[1], params)};
  };
  StepControl ctl;
  ctl.rel_tol = tol.rel;
  ctl.abs_tol = tol.abs;
  ctl.max_step = spec.span() / 32;
  ctl.min_step = 1e-14 * spec.outer_radius;
  std::vector<DenseSegment<2>> segs;
  std::vector<double> bps;
  for (double b : spec.f.radial_breakpoints())
    if (b > r0 && b < spec.outer_radius) bps.push_back(b);
  std::sort(bps.begin(), bps.end());
  dopri5<2>(rhs, r0, Vec<2>{tr.start.u, tr.du(r0)}, spec.outer_radius, ctl, bps,
            [&](const DenseSegment<2>& s) {
              segs.push_back(s);
              return true;
            });
  double worst = 0.0;
  for (std::size_t i = 0; i < profile.r.size(); ++i) {
    const double r = profile.r[i];
    if (r <= r0) continue;
    auto it = std::upper_bound(segs.begin(), segs.end(), r,
                               [](double x, const DenseSegment<2>& s) { return x < s.r0; });
    const auto y = (it == segs.begin() ? segs.front() : *(it - 1))(std::min(r, segs.back().end()));
    worst = std::max(worst, std::abs(y[0] - profile.u[i]));
  }
  return worst;
}

}  // namespace mcurv
