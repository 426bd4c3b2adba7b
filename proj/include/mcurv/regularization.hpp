#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "mcurv/continuation.hpp"
#include "mcurv/error.hpp"
#include "mcurv/problem.hpp"
#include "mcurv/shooting.hpp"
#include "mcurv/spectrum.hpp"

namespace mcurv {

enum class RegularizationKind { SlopeCap, RadialShift, AnnulusShrink };

inline const char* to_string(RegularizationKind k) {
  switch (k) {
    case RegularizationKind::SlopeCap: return "SlopeCap";
    case RegularizationKind::RadialShift: return "RadialShift";
    case RegularizationKind::AnnulusShrink: return "AnnulusShrink";
  }
  return "?";
}

/// f^[n](r, s) = n f(r, 1/n) s for |s| <= 1/n and f(r, s) beyond; weight m^[n] = n f(r, 1/n).
inline ProblemSpec build_f_n(const ProblemSpec& spec, int n) {
  if (n < 1) throw Error(ErrorCode::Malformed, "regularization index n must be >= 1");
  ProblemSpec out = spec;
  out.f = spec.f.slope_capped(n);
  return out;
}

/// Annulus problem on (1/n, R) with g_n(r, s) = f(r - 1/n, s) for r > 1/n and 0 below.
inline ProblemSpec build_g_n(const ProblemSpec& spec, int n) {
  if (spec.inner_radius != 0.0) throw Error(ErrorCode::Malformed, "g_n is built from a ball problem");
  if (n < 1 || !(1.0 / n < spec.outer_radius))
    throw Error(ErrorCode::Malformed, "g_n needs n >= 1 and 1/n < R");
  ProblemSpec out = spec;
  out.inner_radius = 1.0 / n;
  out.f = spec.f.radially_shifted(1.0 / n);
  return out;
}

/// The same nonlinearity on the annulus (1/n, R).
inline ProblemSpec build_annulus_shrink(const ProblemSpec& spec, int n) {
  if (n < 1 || !(1.0 / n < spec.outer_radius))
    throw Error(ErrorCode::Malformed, "annulus shrink needs n >= 1 and 1/n < R");
  ProblemSpec out = spec;
  out.inner_radius = 1.0 / n;
  return out;
}

/// Jump of g_n across r = 1/n at amplitude s: the left value is 0, the right one f(0, s).
inline double g_n_junction_mismatch(const ProblemSpec& base, double s) {
  return std::abs(base.f(0.0, s));
}

struct ExtendedProfile {
  std::vector<double> r, u, du;  ///< on [0, R]
  double junction = 0.0;         ///< 1/n
  double c1_jump = 0.0;          ///< |u'(1/n+) - 0|
  double second_derivative_jump = 0.0;
  double residual = 0.0;          ///< sup of the integrated-form residual on [0, R]
  double residual_extension = 0.0;  ///< the same restricted to [0, 1/n]
  double sup_u = 0.0;
};

namespace detail {

/// sup over r of |r^{N-1} phi1(y'(r)) + lambda int_0^r t^{N-1} g(t, y(t)) dt| along a trajectory
/// on [delta, R] (y is constant below delta, where g vanishes).
inline double integrated_residual(const Trajectory& tr, const ProblemSpec& spec) {
  const int N = spec.dimension;
  double integral = 0.0, worst = 0.0;
  for (const auto& seg : tr.segments) {
    const int sub = 4;
    for (int j = 0; j < sub; ++j) {
      const double a = seg.r0 + seg.h * j / sub, b = seg.r0 + seg.h * (j + 1) / sub;
      integral += boost::math::quadrature::gauss<double, 8>::integrate(
          [&](double t) { return std::pow(t, N - 1) * spec.f(t, seg(t)[0]); }, a, b);
      const double wb = j + 1 == sub ? seg(seg.end())[1] : seg(b)[1];
      worst = std::max(worst, std::abs(wb + tr.lambda * integral));
    }
  }
  return worst;
}

}  // namespace detail

/// Constant extension y_n of an annulus solution on [1/n, R] to the ball [0, R].
inline ExtendedProfile extend_y_n(const SolutionProfile& profile, const ProblemSpec& annulus_spec,
                                  int samples = 32, double slope_tol = 1e-10) {
  const double a = annulus_spec.inner_radius;
  if (!(a > 0.0)) throw Error(ErrorCode::Malformed, "extension needs an annulus profile");
  const auto& tr = profile.trajectory;
  const double slope_at_a = tr.du(a);
  if (std::abs(slope_at_a) > slope_tol)
    throw Error(ErrorCode::Malformed, "profile does not satisfy u'(1/n) = 0");

  ExtendedProfile out;
  out.junction = a;
  const double ua = tr.u(a);
  for (int i = 0; i < samples; ++i) {
    out.r.push_back(a * i / samples);
    out.u.push_back(ua);
    out.du.push_back(0.0);
  }
  out.r.insert(out.r.end(), profile.r.begin(), profile.r.end());
  out.u.insert(out.u.end(), profile.u.begin(), profile.u.end());
  out.du.insert(out.du.end(), profile.du.begin(), profile.du.end());
  out.sup_u = profile.sup_u;
  out.c1_jump = std::abs(slope_at_a);
  FieldParams params(annulus_spec, profile.lambda);
  const double right = std::nextafter(a, annulus_spec.outer_radius);
  out.second_derivative_jump =
      std::abs(quasilinear_second_derivative(right, ua, tr.du(right), params));
  // on [0, 1/n] the extension has y' = 0 and g_n = 0, so both terms vanish identically
  out.residual_extension = 0.0;
  out.residual = std::max(out.residual_extension, detail::integrated_residual(tr, annulus_spec));
  return out;
}

struct SlopeCapRow {
  int n = 0;
  double eigenvalue = 0.0;     ///< lambda_k(m^[n], delta)
  double seed_lambda = 0.0;
  double branch_min_lambda = 0.0;
  std::size_t branch_points = 0;
  std::string error;
};

/// Ladder over f^[n]: eigenvalues of m^[n], a seeded branch, and its lambda infimum.
inline std::vector<SlopeCapRow> limit_study_slope_cap(const ProblemSpec& spec, int k, Sign nu,
                                                       const std::vector<int>& ladder = {4, 16, 64, 256},
                                                       const ContinuationOptions& copt = {},
                                                       int workers = 1) {
  std::vector<SlopeCapRow> rows(ladder.size());
  auto run = [&](std::size_t i) {
    auto& row = rows[i];
    row.n = ladder[i];
    try {
      const auto sn = build_f_n(spec, row.n);
      row.eigenvalue = eigen_prufer(sn, k)[k - 1];
      const auto seed = seed_from_eigenvalue(sn, k, nu, 0.0, copt.shooting);
      row.seed_lambda = seed.point.lambda;
      ContinuationOptions o = copt;
      o.direction = Direction::AwayFromTrivial;
      if (!(o.lambda_cap > 0.0)) o.lambda_cap = 20.0 * row.eigenvalue;
      const auto br = continue_branch(seed.point, sn, o, BranchOrigin::EigenvalueBifurcation,
                                      seed.eigenvalue);
      row.branch_min_lambda = lambda_star(br);
      row.branch_points = br.points.size();
    } catch (const Error& e) {
      row.error = e.what();
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < rows.size(); ++i) jobs.push_back(std::async(std::launch::async, run, i));
    for (auto& j : jobs) j.get();
  }
  return rows;
}

struct NodalFamilyRow {
  int n = 0;  ///< nodal count: the target signature is (n, nu)
  Sign nu = Sign::Plus;
  std::size_t count = 0;
  double d = 0.0;
  double sup_u = 0.0;
  double sup_du = 0.0;
  double c1_norm = 0.0;
  std::string error;

  bool found() const { return count > 0; }
};

struct NodalFamilyStudy {
  double lambda = 1.0;
  std::vector<NodalFamilyRow> rows;  ///< ordered by nu (+ first), then n
  bool eventually_decreasing_plus = false;
  bool eventually_decreasing_minus = false;
  double ratio_plus = kInfinity;  ///< last / first C1 norm
  double ratio_minus = kInfinity;

  bool all_found() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.found(); });
  }
  bool decay_holds() const {
    return eventually_decreasing_plus && eventually_decreasing_minus && ratio_plus < 0.5 &&
           ratio_minus < 0.5;
  }
};

/// Decreasing from the first index where the consecutive ratio drops below 1.
inline bool eventually_decreasing(const std::vector<double>& v) {
  std::size_t start = v.size();
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if (v[i + 1] / v[i] < 1.0) {
      start = i;
      break;
    }
  if (start == v.size()) return false;
  for (std::size_t i = start; i + 1 < v.size(); ++i)
    if (!(v[i + 1] < v[i])) return false;
  return true;
}

/// Nodal solutions at fixed lambda for every count n <= n_max and both signs, with norms.
/// Among several solutions of one class, the one of smallest |d| is recorded.
inline NodalFamilyStudy limit_study_nodal_families(const ProblemSpec& spec, double lambda, int n_max,
                                                const std::vector<double>& d_grid,
                                                const ShootingOptions& opt = {}) {
  if (n_max < 1) throw Error(ErrorCode::Malformed, "n_max must be >= 1");
  NodalFamilyStudy st;
  st.lambda = lambda;
  for (Sign nu : {Sign::Plus, Sign::Minus}) {
    for (int n = 1; n <= n_max; ++n) {
      NodalFamilyRow row;
      row.n = n;
      row.nu = nu;
      try {
        const auto res = solve_all(lambda, spec, NodalSignature(n, nu), d_grid, opt);
        row.count = res.solutions.size();
        if (res.solutions.empty()) {
          row.error = res.failures.empty() ? "MissingSolution: no bracket at this scan resolution"
                                           : res.failures.front();
        } else {
          const auto best = std::min_element(
              res.solutions.begin(), res.solutions.end(),
              [](const auto& a, const auto& b) { return std::abs(a.d) < std::abs(b.d); });
          row.d = best->d;
          row.sup_u = best->sup_u;
          row.sup_du = best->sup_du;
          row.c1_norm = best->c1_norm;
        }
      } catch (const Error& e) {
        row.error = e.what();
      }
      st.rows.push_back(row);
    }
  }
  for (Sign nu : {Sign::Plus, Sign::Minus}) {
    std::vector<double> c1;
    for (const auto& r : st.rows)
      if (r.nu == nu && r.found()) c1.push_back(r.c1_norm);
    const bool dec = c1.size() >= 2 && eventually_decreasing(c1);
    const double ratio = c1.size() >= 2 ? c1.back() / c1.front() : kInfinity;
    if (nu == Sign::Plus) {
      st.eventually_decreasing_plus = dec;
      st.ratio_plus = ratio;
    } else {
      st.eventually_decreasing_minus = dec;
      st.ratio_minus = ratio;
    }
  }
  return st;
}

struct ShiftLadderRow {
  int n = 0;
  double eigenvalue = 0.0;  ///< lambda_k(m^[n], 1/n)
  double difference = 0.0;  ///< |lambda at this n - lambda at the previous n|, 0 for the first
};

/// lambda_k of the shifted weight on (1/n, R) along a ladder of n.
inline std::vector<ShiftLadderRow> shift_family_ladder(const WeightFn& m, int N, double R, int k,
                                                       const std::vector<int>& ladder,
                                                       const PruferOptions& opt = {}) {
  std::vector<ShiftLadderRow> rows;
  for (int n : ladder) {
    const auto set = eigen_shift_family(m, N, R, n, k, opt);
    ShiftLadderRow row{n, set[k - 1], 0.0};
    if (!rows.empty()) row.difference = std::abs(row.eigenvalue - rows.back().eigenvalue);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mcurv
