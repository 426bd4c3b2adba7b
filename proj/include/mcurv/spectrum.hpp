#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "mcurv/dopri5.hpp"
#include "mcurv/error.hpp"
#include "mcurv/integrator.hpp"
#include "mcurv/problem.hpp"

namespace mcurv {

using WeightFn = std::function<double(double)>;

enum class EigenMethod { Prufer, Nystrom };

inline const char* to_string(EigenMethod m) {
  return m == EigenMethod::Prufer ? "prufer" : "nystrom";
}

struct Eigenpair {
  int k = 0;
  double lambda = 0.0;
  int zeros = 0;  ///< interior sign changes of the eigenfunction
  EigenMethod method = EigenMethod::Prufer;
  double residual = 0.0;
};

/// Weighted eigenvalues of -(r^{N-1} u')' = lambda r^{N-1} m(r) u, u'(delta) = 0 = u(R).
struct EigenSet {
  int dimension = 3;
  double inner_radius = 0.0;
  double outer_radius = 1.0;
  std::vector<Eigenpair> values;

  double operator[](std::size_t i) const { return values.at(i).lambda; }
  std::size_t size() const { return values.size(); }
};

/// Green kernel of -(r^{N-1}u')' = r^{N-1} h with u'(delta) = 0 = u(R).
/// It depends on max(t, s) only, so delta enters through the domain alone.
inline double green_kernel_eval(double t, double s, int N, double R) {
  if (N < 2) throw Error(ErrorCode::Domain, "green kernel needs N >= 2");
  const double x = std::max(t, s);
  if (!(x > 0.0)) throw Error(ErrorCode::Domain, "green kernel is singular at max(t, s) = 0");
  if (N == 2) return std::log(R / x);
  return (std::pow(R, 2 - N) - std::pow(x, 2 - N)) / (2 - N);
}

struct PruferOptions {
  IntegratorTolerances tol{1e-12, 1e-14};
  double rel_tol = 1e-10;  ///< eigenvalue bracket width
  double lambda_cap = 1e12;
  double r_start_factor = 1e-6;
};

namespace detail {

struct PruferRun {
  double theta_end = 0.0;
  int zeros = 0;
};

/// Integrates theta' = cos^2(theta) / p + lambda p m sin^2(theta), p = r^{N-1}.
inline PruferRun prufer_run(const WeightFn& m, int N, double delta, double R, double lambda,
                            const PruferOptions& opt) {
  auto p = [N](double r) { return std::pow(r, N - 1); };
  double r0 = delta;
  double theta0 = std::numbers::pi / 2;
  if (delta == 0.0) {
    r0 = opt.r_start_factor * R;
    const double m0 = m(0.0);
    const double u = 1.0 - lambda * m0 * r0 * r0 / (2.0 * N);
    const double flux = -lambda * m0 * std::pow(r0, N) / N;
    theta0 = std::atan2(u, flux);
  }
  auto rhs = [&](double r, const Vec<1>& y) -> Vec<1> {
    const double c = std::cos(y[0]), s = std::sin(y[0]);
    const double pr = p(r);
    return {c * c / pr + lambda * pr * m(r) * s * s};
  };
  StepControl ctl;
  ctl.rel_tol = opt.tol.rel;
  ctl.abs_tol = opt.tol.abs;
  ctl.max_step = (R - delta) / 16;
  ctl.min_step = 1e-15 * R;
  PruferRun run;
  const double cutoff = R - 1e-9 * (R - delta);
  double prev = theta0;
  dopri5<1>(rhs, r0, Vec<1>{theta0}, R, ctl, {}, [&](const DenseSegment<1>& seg) {
    for (int j = 1; j <= 4; ++j) {
      const double r = seg.r0 + seg.h * j / 4;
      if (r >= cutoff) break;
      const double th = seg(r)[0];
      // zeros of u = rho sin(theta) occur when theta crosses a multiple of pi
      run.zeros += static_cast<int>(std::floor(th / std::numbers::pi) -
                                    std::floor(prev / std::numbers::pi));
      prev = th;
    }
    run.theta_end = seg(seg.end())[0];
    return true;
  });
  return run;
}

inline double sampled_max(const WeightFn& m, double a, double b) {
  double mx = 0.0;
  for (int i = 0; i <= 256; ++i) mx = std::max(mx, m(a + (b - a) * i / 256));
  return mx;
}

}  // namespace detail

/// Eigenvalues by bisection-type root finding on the Prufer angle: theta(R; lambda_k) = k pi.
inline EigenSet eigen_prufer(const WeightFn& m, int N, double delta, double R, int count,
                             const PruferOptions& opt = {}) {
  if (count < 1) throw Error(ErrorCode::Malformed, "eigenvalue count must be >= 1");
  if (N < 2 || !(delta >= 0.0 && delta < R)) throw Error(ErrorCode::Malformed, "bad domain");
  const double mmax = detail::sampled_max(m, delta, R);
  if (!(mmax > 0.0)) throw Error(ErrorCode::WeightVanishes, "weight vanishes on the sample grid");

  EigenSet set{N, delta, R, {}};
  double lower = 0.0;
  for (int k = 1; k <= count; ++k) {
    const double target = k * std::numbers::pi;
    auto F = [&](double l) { return detail::prufer_run(m, N, delta, R, l, opt).theta_end - target; };
    double hi = std::max(lower * 1.5, std::pow(k * std::numbers::pi / (R - delta), 2) / mmax);
    double fhi = F(hi);
    while (fhi <= 0.0) {
      hi *= 2.0;
      if (hi > opt.lambda_cap)
        throw Error(ErrorCode::BracketFailure, "eigenvalue search window exceeded the cap");
      fhi = F(hi);
    }
    double lo = lower;
    double flo = F(lo);
    std::uintmax_t iters = 200;
    const double rel = opt.rel_tol;
    const auto root = boost::math::tools::toms748_solve(
        F, lo, hi, flo, fhi,
        [rel](double a, double b) { return std::abs(b - a) <= rel * std::max(std::abs(a), std::abs(b)); },
        iters);
    const double lambda = 0.5 * (root.first + root.second);
    const auto run = detail::prufer_run(m, N, delta, R, lambda, opt);
    set.values.push_back({k, lambda, run.zeros, EigenMethod::Prufer,
                          std::abs(root.second - root.first)});
    lower = lambda;
  }
  return set;
}

/// Prufer eigenvalues for the linearization weight of a problem (requires a known weight).
inline EigenSet eigen_prufer(const ProblemSpec& spec, int count, const PruferOptions& opt = {}) {
  if (!spec.f.has_linear_weight())
    throw Error(ErrorCode::Malformed, "nonlinearity has no linearization weight");
  const Nonlinearity f = spec.f;
  WeightFn m = [f](double r) { return *f.linear_weight(r); };
  return eigen_prufer(m, spec.dimension, spec.inner_radius, spec.outer_radius, count, opt);
}

struct NystromOptions {
  int quadrature = 512;
  bool richardson = true;
};

namespace detail {

struct NystromRun {
  std::vector<double> lambdas;
  std::vector<int> zeros;
};

/// Trapezoid nodes on [delta, R) so the max(t, s) crease of the kernel sits on a node;
/// each row is then a sum of two smooth trapezoid sums.
inline NystromRun nystrom_run(const WeightFn& m, int N, double delta, double R, int Q, int count,
                              bool vectors) {
  const double h = (R - delta) / Q;
  Eigen::VectorXd t(Q), sqd(Q);
  for (int i = 0; i < Q; ++i) {
    t[i] = delta + i * h;
    const double wq = i == 0 ? 0.5 * h : h;
    const double mv = m(t[i]);
    if (mv < 0.0) throw Error(ErrorCode::Malformed, "weight must be nonnegative");
    sqd[i] = std::sqrt(wq * std::pow(t[i], N - 1) * mv);
  }
  Eigen::MatrixXd K(Q, Q), B(Q, Q);
  for (int i = 0; i < Q; ++i)
    for (int j = 0; j < Q; ++j) {
      K(i, j) = green_kernel_eval(t[i], t[j], N, R);
      B(i, j) = sqd[i] * K(i, j) * sqd[j];
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      B, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::BracketFailure, "eigensolver failed");
  const auto& mu = es.eigenvalues();  // ascending
  const double top = mu[Q - 1];
  if (!(top > 1e-300)) throw Error(ErrorCode::WeightVanishes, "no positive eigenvalues");
  NystromRun run;
  for (int k = 0; k < count; ++k) {
    const double muk = mu[Q - 1 - k];
    if (!(muk > 1e-14 * top)) break;
    run.lambdas.push_back(1.0 / muk);
    if (vectors) {
      const Eigen::VectorXd y = es.eigenvectors().col(Q - 1 - k);
      const Eigen::VectorXd u = K * (sqd.cwiseProduct(y));
      int changes = 0;
      int last = 0;
      const double floor_val = 1e-10 * u.cwiseAbs().maxCoeff();
      for (int i = 0; i < Q; ++i) {
        const int s = u[i] > floor_val ? 1 : (u[i] < -floor_val ? -1 : 0);
        if (s != 0) {
          if (last != 0 && s != last) ++changes;
          last = s;
        }
      }
      run.zeros.push_back(changes);
    }
  }
  return run;
}

}  // namespace detail

/// Eigenvalues as reciprocals of the discretized integral operator
/// u -> int K(t,s) s^{N-1} m(s) u(s) ds, Richardson-extrapolated from Q and 2Q.
inline EigenSet eigen_nystrom(const WeightFn& m, int N, double delta, double R, int count,
                              const NystromOptions& opt = {}) {
  if (!(delta > 0.0)) throw Error(ErrorCode::Domain, "Nystrom discretization requires delta > 0");
  if (opt.quadrature < 64) throw Error(ErrorCode::Malformed, "quadrature size must be >= 64");
  if (count < 1) throw Error(ErrorCode::Malformed, "eigenvalue count must be >= 1");
  const auto coarse = detail::nystrom_run(m, N, delta, R, opt.quadrature, count, true);
  if (coarse.lambdas.empty())
    throw Error(ErrorCode::WeightVanishes, "weight admits no positive eigenvalues");
  EigenSet set{N, delta, R, {}};
  if (!opt.richardson) {
    for (std::size_t k = 0; k < coarse.lambdas.size(); ++k)
      set.values.push_back({static_cast<int>(k) + 1, coarse.lambdas[k], coarse.zeros[k],
                            EigenMethod::Nystrom, 0.0});
    return set;
  }
  const auto fine = detail::nystrom_run(m, N, delta, R, 2 * opt.quadrature, count, false);
  const std::size_t n = std::min(coarse.lambdas.size(), fine.lambdas.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double lq = coarse.lambdas[k], l2q = fine.lambdas[k];
    set.values.push_back({static_cast<int>(k) + 1, (4.0 * l2q - lq) / 3.0, coarse.zeros[k],
                          EigenMethod::Nystrom, std::abs(l2q - lq) / 3.0});
  }
  return set;
}

/// Eigenvalues for the shifted weight m(r - 1/n) on the annulus (1/n, R).
inline EigenSet eigen_shift_family(const WeightFn& m, int N, double R, int n, int count,
                                   const PruferOptions& opt = {}) {
  if (n < static_cast<int>(std::ceil(2.0 / R)))
    throw Error(ErrorCode::Malformed, "shift index n must satisfy 1/n < R/2");
  const double shift = 1.0 / n;
  WeightFn shifted = [m, shift](double r) { return m(r - shift); };
  return eigen_prufer(shifted, N, shift, R, count, opt);
}

}  // namespace mcurv
