#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "mcurv/error.hpp"
#include "mcurv/problem.hpp"
#include "mcurv/shooting.hpp"
#include "mcurv/spectrum.hpp"

namespace mcurv {

struct BranchPoint {
  double lambda = 0.0;
  double d = 0.0;
  double sup_u = 0.0;
  double sup_du = 0.0;
  double c1_norm = 0.0;
  NodalSignature signature;
  bool fold = false;
};

inline BranchPoint to_branch_point(const SolutionProfile& p) {
  return {p.lambda, p.d, p.sup_u, p.sup_du, p.c1_norm, p.signature, false};
}

enum class BranchOrigin { EigenvalueBifurcation, ZeroLambdaOrigin, UserSeed };
enum class Termination { LambdaCap, StepFailure, TrivialCollapse, PointLimit };

inline const char* to_string(BranchOrigin o) {
  switch (o) {
    case BranchOrigin::EigenvalueBifurcation: return "EigenvalueBifurcation";
    case BranchOrigin::ZeroLambdaOrigin: return "ZeroLambdaOrigin";
    case BranchOrigin::UserSeed: return "UserSeed";
  }
  return "?";
}

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::LambdaCap: return "LambdaCap";
    case Termination::StepFailure: return "StepFailure";
    case Termination::TrivialCollapse: return "TrivialCollapse";
    case Termination::PointLimit: return "PointLimit";
  }
  return "?";
}

struct Fold {
  std::size_t index = 0;  ///< branch point nearest the turning point
  double lambda = 0.0;    ///< refined turning-point value
  double d = 0.0;
};

struct Branch {
  std::vector<BranchPoint> points;  ///< in arclength order
  BranchOrigin origin = BranchOrigin::UserSeed;
  double origin_lambda = 0.0;  ///< lambda_k for eigenvalue origins, 0 for the zero-lambda origin
  Termination termination = Termination::StepFailure;        ///< at the last point
  std::optional<Termination> start_termination;              ///< at the first point, two-sided traces
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::vector<Fold> folds;
  std::vector<std::string> log;

  NodalSignature signature() const { return points.at(0).signature; }
};

enum class Direction { AwayFromTrivial, IncreasingLambda, DecreasingLambda };

struct ContinuationOptions {
  ShootingOptions shooting;
  double lambda_cap = 0.0;     ///< 0: 20 lambda_1(m, delta), or 20 (pi / (R - delta))^2
  double lambda_scale = 0.0;   ///< 0: the seed lambda
  double lambda_floor = 0.0;   ///< stop (TrivialCollapse) once lambda drops below this
  double initial_step = 1e-2;  ///< scaled arclength
  double max_step = 0.2;
  double min_step = 1e-7;
  double d_floor_factor = 1e-8;  ///< |d| below this times (R - delta) counts as trivial
  double residual_tol = 1e-10;   ///< |u(R)| / |d| at a corrector solution
  int newton_iterations = 10;
  int max_points = 4000;
  Direction direction = Direction::AwayFromTrivial;
};

/// Default cap for the lambda direction of a branch.
inline double default_lambda_cap(const ProblemSpec& spec) {
  if (spec.f.has_linear_weight()) {
    try {
      return 20.0 * eigen_prufer(spec, 1)[0];
    } catch (const Error&) {
    }
  }
  return 20.0 * std::pow(std::numbers::pi / spec.span(), 2);
}

struct BranchSeed {
  BranchPoint point;
  SolutionProfile profile;
  double eigenvalue = 0.0;
};

/// Small-amplitude solution with signature (k, nu) near lambda_k(m, delta).
inline BranchSeed seed_from_eigenvalue(const ProblemSpec& spec, int k, Sign nu,
                                       double epsilon = 0.0, const ShootingOptions& opt = {}) {
  const auto rep = validate_hypotheses(spec);
  if (!rep.a2_usable() || !spec.f.has_linear_weight())
    throw Error(ErrorCode::SeedFailure, "eigenvalue seeding requires a usable linearization weight");
  const NodalSignature target(k, nu);
  const double eps = epsilon > 0.0 ? epsilon : 1e-3 * spec.span();
  const double lk = eigen_prufer(spec, k)[k - 1];
  try {
    const auto p = solve_for_lambda(to_double(nu) * eps, spec, target, 0.8 * lk, 1.2 * lk, opt, 33);
    return {to_branch_point(p), p, lk};
  } catch (const Error& e) {
    throw Error(ErrorCode::SeedFailure, "no " + target.str() + " solution with |d| = " +
                                            std::to_string(eps) + " for lambda in [" +
                                            std::to_string(0.8 * lk) + ", " +
                                            std::to_string(1.2 * lk) + "]: " + e.what());
  }
}

namespace detail {

/// Shooting residual in scaled coordinates x = (lambda / ls, d / ds).
struct ScaledResidual {
  const ProblemSpec& spec;
  const ShootingOptions& opt;
  double ls, ds;

  double operator()(const std::array<double, 2>& x) const {
    const double d = x[1] * ds;
    return shoot(d, x[0] * ls, spec, opt).terminal / d;
  }

  std::array<double, 2> gradient(const std::array<double, 2>& x) const {
    const double ha = std::max(1e-6, 1e-6 * std::abs(x[0]));
    const double hb = 1e-6 * std::abs(x[1]);
    const double ga = ((*this)({x[0] + ha, x[1]}) - (*this)({x[0] - ha, x[1]})) / (2 * ha);
    const double gb = ((*this)({x[0], x[1] + hb}) - (*this)({x[0], x[1] - hb})) / (2 * hb);
    return {ga, gb};
  }
};

inline std::array<double, 2> unit_tangent(const std::array<double, 2>& g) {
  const double n = std::hypot(g[0], g[1]);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::BracketFailure, "singular Jacobian");
  return {-g[1] / n, g[0] / n};
}

inline double dot(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return a[0] * b[0] + a[1] * b[1];
}

/// lambda with u(R; lambda, d) = 0 at fixed d, by secant iteration from a nearby guess.
inline std::optional<double> lambda_at_amplitude(double d, double guess, const ProblemSpec& spec,
                                                 const ShootingOptions& opt) {
  auto g = [&](double l) { return shoot(d, l, spec, opt).terminal / d; };
  double l0 = guess, l1 = guess * (1.0 + 1e-4);
  double g0 = g(l0), g1 = g(l1);
  for (int it = 0; it < 40; ++it) {
    if (g1 == g0) break;
    const double l2 = l1 - g1 * (l1 - l0) / (g1 - g0);
    if (!(l2 > 0.0) || !std::isfinite(l2)) return std::nullopt;
    l0 = l1;
    g0 = g1;
    l1 = l2;
    g1 = g(l1);
    if (std::abs(l1 - l0) <= 1e-13 * l1) return l1;
  }
  if (std::abs(g1) < 1e-10) return l1;
  return std::nullopt;
}

/// Turning point of lambda(d) between the neighbours of a flagged point: golden-section
/// search on lambda(d) solved at fixed d; the three-point parabola is the fallback.
inline void refine_folds(Branch& b, const ProblemSpec& spec, const ShootingOptions& opt) {
  b.folds.clear();
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    if (!b.points[i].fold) continue;
    Fold f{i, b.points[i].lambda, b.points[i].d};
    if (i > 0 && i + 1 < b.points.size()) {
      const double x0 = b.points[i - 1].d, x1 = b.points[i].d, x2 = b.points[i + 1].d;
      const double y0 = b.points[i - 1].lambda, y1 = b.points[i].lambda, y2 = b.points[i + 1].lambda;
      const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
      const double a = (d12 - d01) / (x2 - x0);
      const double bcoef = d01 - a * (x0 + x1);
      if (std::isfinite(a) && a != 0.0) {
        const double xv = -bcoef / (2 * a);
        if (xv >= std::min({x0, x1, x2}) && xv <= std::max({x0, x1, x2})) {
          f.d = xv;
          f.lambda = y1 + bcoef * (xv - x1) + a * (xv * xv - x1 * x1);
        }
      }
      const bool minimum = y1 <= y0 && y1 <= y2;
      const double sgn = minimum ? 1.0 : -1.0;
      try {
        double lo = std::min(x0, x2), hi = std::max(x0, x2);
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = hi - gr * (hi - lo), e = lo + gr * (hi - lo);
        auto lam = [&](double d) {
          const auto l = lambda_at_amplitude(d, f.lambda, spec, opt);
          if (!l) throw Error(ErrorCode::BracketFailure, "fold refinement lost the branch");
          return *l;
        };
        double fc = lam(c), fe = lam(e);
        while (hi - lo > 1e-9 * std::max(1.0, std::abs(hi))) {
          if (sgn * fc < sgn * fe) {
            hi = e;
            e = c;
            fe = fc;
            c = hi - gr * (hi - lo);
            fc = lam(c);
          } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + gr * (hi - lo);
            fe = lam(e);
          }
        }
        const double dm = 0.5 * (lo + hi);
        const double lm = lam(dm);
        if (sgn * lm <= sgn * f.lambda + 1e-8 * std::abs(f.lambda)) {
          f.d = dm;
          f.lambda = lm;
        }
      } catch (const Error& e) {
        b.log.push_back(std::string("fold refinement fell back to the parabola: ") + e.what());
      }
    }
    b.folds.push_back(f);
  }
}

inline void update_range(Branch& b) {
  b.lambda_min = kInfinity;
  b.lambda_max = -kInfinity;
  for (const auto& p : b.points) {
    b.lambda_min = std::min(b.lambda_min, p.lambda);
    b.lambda_max = std::max(b.lambda_max, p.lambda);
  }
}

}  // namespace detail

/// Pseudo-arclength continuation of u(R; lambda, d) = 0 from a validated seed.
inline Branch continue_branch(const BranchPoint& seed, const ProblemSpec& spec,
                              const ContinuationOptions& opt = {},
                              BranchOrigin origin = BranchOrigin::UserSeed,
                              double origin_lambda = 0.0) {
  if (!(seed.lambda > 0.0) || seed.d == 0.0)
    throw Error(ErrorCode::Malformed, "seed must have lambda > 0 and d != 0");
  const double cap = opt.lambda_cap > 0.0 ? opt.lambda_cap : default_lambda_cap(spec);
  const double ls = opt.lambda_scale > 0.0 ? opt.lambda_scale : seed.lambda;
  const double ds_scale = spec.span();
  const double d_floor = opt.d_floor_factor * spec.span();
  const double d_max = 0.999 * std::min(spec.alpha, spec.span());
  detail::ScaledResidual G{spec, opt.shooting, ls, ds_scale};

  Branch br;
  br.origin = origin;
  br.origin_lambda = origin_lambda;
  br.points.push_back(seed);
  std::array<double, 2> x{seed.lambda / ls, seed.d / ds_scale};
  std::array<double, 2> t = detail::unit_tangent(G.gradient(x));
  const double sgn_d = seed.d > 0.0 ? 1.0 : -1.0;
  const double want = opt.direction == Direction::AwayFromTrivial ? t[1] * sgn_d
                      : opt.direction == Direction::IncreasingLambda ? t[0]
                                                                      : -t[0];
  if (want < 0.0) t = {-t[0], -t[1]};

  char msg[160];
  double h = opt.initial_step;
  bool done = false;
  br.termination = Termination::PointLimit;
  while (!done && static_cast<int>(br.points.size()) < opt.max_points) {
    std::optional<std::array<double, 2>> accepted;
    std::optional<SolutionProfile> profile;
    int iterations = 0;
    bool jump = false;
    bool collapse = false;  // some corrector left the nontrivial half-plane
    while (!accepted && h >= opt.min_step) {
      std::array<double, 2> y{x[0] + h * t[0], x[1] + h * t[1]};
      auto outside = [&](const std::array<double, 2>& z) {
        return !(z[0] > 0.0) || z[1] * sgn_d < 0.0 || std::abs(z[1] * ds_scale) < d_floor;
      };
      bool ok = false;
      try {
        for (iterations = 1; iterations <= opt.newton_iterations; ++iterations) {
          if (outside(y)) {
            collapse = true;
            break;
          }
          if (std::abs(y[1] * ds_scale) >= d_max) break;
          const double g = G(y);
          const auto J = G.gradient(y);
          const double c = detail::dot(t, {y[0] - x[0], y[1] - x[1]}) - h;
          const double det = J[0] * t[1] - J[1] * t[0];
          if (!(std::abs(det) > 0.0)) break;
          y[0] += (-g * t[1] + c * J[1]) / det;
          y[1] += (-c * J[0] + g * t[0]) / det;
          if (outside(y)) {
            collapse = true;
            break;
          }
          if (std::abs((-g * t[1] + c * J[1]) / det) + std::abs((-c * J[0] + g * t[0]) / det) <
                  1e-11 &&
              std::abs(G(y)) <= opt.residual_tol) {
            ok = true;
            break;
          }
        }
        if (ok) {
          const auto shot = shoot(y[1] * ds_scale, y[0] * ls, spec, opt.shooting);
          auto p = make_profile(shot, spec, opt.shooting);
          if (!(p.signature == seed.signature)) {
            std::snprintf(msg, sizeof msg, "NodalJump: %s at lambda=%.10g d=%.10g, step %.3g",
                          p.signature.str().c_str(), p.lambda, p.d, h);
            br.log.push_back(msg);
            jump = true;
          } else {
            accepted = y;
            profile = std::move(p);
          }
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateSolution || e.code() == ErrorCode::BoundViolation)
          br.log.push_back(std::string("rejected corrector point: ") + e.what());
      }
      if (!accepted) h *= 0.5;
    }
    if (!accepted) {
      br.termination = collapse ? Termination::TrivialCollapse : Termination::StepFailure;
      if (jump) br.log.push_back("branch truncated after repeated NodalJump");
      break;
    }
    auto pt = to_branch_point(*profile);
    const auto y = *accepted;
    std::array<double, 2> tn;
    try {
      tn = detail::unit_tangent(G.gradient(y));
    } catch (const Error&) {
      tn = t;
    }
    if (detail::dot(tn, t) < 0.0) tn = {-tn[0], -tn[1]};
    if ((tn[0] > 0.0) != (t[0] > 0.0) && tn[0] != 0.0 && t[0] != 0.0) {
      // turning point between the previous and the new point
      auto& prev = br.points.back();
      const bool minimum = tn[0] > 0.0;
      if ((minimum && prev.lambda <= pt.lambda) || (!minimum && prev.lambda >= pt.lambda))
        prev.fold = true;
      else
        pt.fold = true;
    }
    br.points.push_back(pt);
    x = y;
    t = tn;
    if (iterations <= 3) h = std::min(2.0 * h, opt.max_step);
    if (pt.lambda >= cap) {
      br.termination = Termination::LambdaCap;
      done = true;
    } else if (opt.lambda_floor > 0.0 && pt.lambda <= opt.lambda_floor) {
      br.termination = Termination::TrivialCollapse;
      done = true;
    }
  }
  detail::update_range(br);
  detail::refine_folds(br, spec, opt.shooting);
  return br;
}

/// Traces both directions from the seed and joins them into one arclength-ordered branch.
inline Branch trace_both_ways(const BranchPoint& seed, const ProblemSpec& spec,
                              ContinuationOptions opt = {},
                              BranchOrigin origin = BranchOrigin::UserSeed,
                              double origin_lambda = 0.0) {
  opt.direction = Direction::DecreasingLambda;
  const auto back = continue_branch(seed, spec, opt, origin, origin_lambda);
  opt.direction = Direction::IncreasingLambda;
  const auto fwd = continue_branch(seed, spec, opt, origin, origin_lambda);
  Branch out;
  out.origin = origin;
  out.origin_lambda = origin_lambda;
  out.points.assign(back.points.rbegin(), back.points.rend());
  // the seed closes both halves; a fold flag on it from either side is kept
  out.points.back().fold = back.points.front().fold || fwd.points.front().fold;
  out.points.insert(out.points.end(), fwd.points.begin() + 1, fwd.points.end());
  out.termination = fwd.termination;
  out.start_termination = back.termination;
  for (const auto& l : back.log) out.log.push_back("backward: " + l);
  for (const auto& l : fwd.log) out.log.push_back("forward: " + l);
  detail::update_range(out);
  detail::refine_folds(out, spec, opt.shooting);
  return out;
}

/// Infimum of lambda over the branch; a bifurcation origin (lambda_k, 0) belongs to it.
inline double lambda_star(const Branch& b) {
  if (b.points.empty()) throw Error(ErrorCode::Malformed, "empty branch");
  double m = kInfinity;
  for (const auto& p : b.points) m = std::min(m, p.lambda);
  for (const auto& f : b.folds) m = std::min(m, f.lambda);
  if (b.origin == BranchOrigin::EigenvalueBifurcation) m = std::min(m, b.origin_lambda);
  if (b.origin == BranchOrigin::ZeroLambdaOrigin) m = 0.0;
  return m;
}

/// Every point shares the first point's signature and obeys the a priori bounds.
inline bool branch_invariants_hold(const Branch& b, double span) {
  if (b.points.empty()) return false;
  return std::all_of(b.points.begin(), b.points.end(), [&](const BranchPoint& p) {
    return p.signature == b.points.front().signature && p.sup_du < 1.0 && p.sup_u < span &&
           p.lambda > 0.0;
  });
}

struct SweepSolution {
  double d = 0.0;
  double sup_u = 0.0;
  double sup_du = 0.0;
  double c1_norm = 0.0;
};

struct SweepCell {
  double lambda = 0.0;
  NodalSignature signature;
  std::vector<SweepSolution> solutions;  ///< sorted by d
  std::vector<std::string> errors;

  std::size_t count() const { return solutions.size(); }
};

/// Solution counts and norms over a lambda grid for each signature; cells are independent.
inline std::vector<SweepCell> sweep_diagram(const ProblemSpec& spec,
                                            const std::vector<double>& lambda_grid,
                                            const std::vector<NodalSignature>& signatures,
                                            const std::vector<double>& d_grid,
                                            const ShootingOptions& opt = {}) {
  if (lambda_grid.size() < 8) throw Error(ErrorCode::Malformed, "lambda grid needs >= 8 points");
  for (double l : lambda_grid)
    if (!(l > 0.0)) throw Error(ErrorCode::Malformed, "lambda grid must be positive");
  if (signatures.empty()) throw Error(ErrorCode::Malformed, "no signatures requested");

  std::vector<SweepCell> cells;
  for (double l : lambda_grid)
    for (const auto& s : signatures) cells.push_back({l, s, {}, {}});

  ShootingOptions serial = opt;
  serial.workers = 1;
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& c = cells[i];
      try {
        const auto res = solve_all(c.lambda, spec, c.signature, d_grid, serial);
        for (const auto& p : res.solutions)
          c.solutions.push_back({p.d, p.sup_u, p.sup_du, p.c1_norm});
        c.errors = res.failures;
      } catch (const Error& e) {
        c.errors.push_back(e.what());
      }
    }
  };
  const std::size_t w = static_cast<std::size_t>(std::max(1, opt.workers));
  if (w == 1) {
    run(0, cells.size());
  } else {
    std::vector<std::future<void>> jobs;
    const std::size_t chunk = (cells.size() + w - 1) / w;
    for (std::size_t b = 0; b < cells.size(); b += chunk)
      jobs.push_back(std::async(std::launch::async, run, b, std::min(cells.size(), b + chunk)));
    for (auto& j : jobs) j.get();
  }
  std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (a.signature.k != b.signature.k) return a.signature.k < b.signature.k;
    return a.signature.nu > b.signature.nu;
  });
  return cells;
}

}  // namespace mcurv
