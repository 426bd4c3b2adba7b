#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcurv/dopri5.hpp"
#include "mcurv/field.hpp"

using namespace mcurv;

TEST(Phi1, Examples) {
  EXPECT_EQ(phi1(0.0), 0.0);
  EXPECT_NEAR(phi1(0.6), 0.75, 1e-15);
  EXPECT_NEAR(phi1(-0.6), -0.75, 1e-15);
  EXPECT_THROW(phi1(1.0), Error);
  EXPECT_THROW(phi1(-1.2), Error);
}

TEST(Phi1Inv, Examples) {
  EXPECT_EQ(phi1_inv(0.0), 0.0);
  EXPECT_NEAR(phi1_inv(0.75), 0.6, 1e-15);
  const double big = phi1_inv(1e6);
  EXPECT_GT(big, 1.0 - 1e-11);
  EXPECT_LT(big, 1.0);
  EXPECT_LT(phi1_inv(-1e6), -1.0 + 1e-11);
}

TEST(HFactor, Examples) {
  EXPECT_EQ(h_factor(0.0), 1.0);
  EXPECT_NEAR(h_factor(0.6), 0.512, 1e-15);
  EXPECT_EQ(h_factor(1.5), 0.0);
  EXPECT_EQ(h_factor(1.0), 0.0);
}

TEST(Phi1, RoundTripMonotoneOdd) {
  double prev = -kInfinity;
  for (int i = -999; i <= 999; ++i) {
    const double s = i * 1e-3;
    EXPECT_NEAR(phi1_inv(phi1(s)), s, 1e-12);
    EXPECT_EQ(phi1(-s), -phi1(s));
    EXPECT_GT(phi1(s), prev);
    prev = phi1(s);
  }
  const double h = 1e-6;
  EXPECT_NEAR((phi1(h) - phi1(-h)) / (2 * h), 1.0, 1e-6);
}

namespace {

FieldParams linear_params(int N, double lambda, double delta = 0.0) {
  ProblemSpec spec;
  spec.dimension = N;
  spec.inner_radius = delta;
  spec.f = Nonlinearity::linear_plus_cubic(Weight::constant(1), 0);
  return FieldParams(spec, lambda);
}

}  // namespace

TEST(FluxRhs, Examples) {
  auto p = linear_params(3, 7.0);
  const auto z = flux_rhs({1.0, 0.0, 0.0}, p);
  EXPECT_EQ(z.du, 0.0);
  EXPECT_EQ(z.dw, 0.0);

  const auto top = flux_rhs({1.0, 0.3, 0.0}, p);
  EXPECT_EQ(top.du, 0.0);
  EXPECT_LT(top.dw, 0.0);

  const auto d = flux_rhs({0.5, 0.123, -0.09375}, p);
  EXPECT_NEAR(d.du, -0.375 / std::sqrt(1.140625), 1e-15);
  EXPECT_NEAR(d.du, -0.35112, 1e-5);
}

TEST(FluxRhs, QuasilinearFormAgrees) {
  // (r^{N-1}u')' from the flux route equals -r^{N-1}[lambda f h(u') - (N-1) u'^3 / r]
  ProblemSpec spec;
  spec.dimension = 4;
  spec.f = Nonlinearity::linear_plus_cubic(Weight::affine(1, 0.5), 2);
  FieldParams p(spec, 3.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rr(0.05, 1.0), uu(-0.8, 0.8), vv(-0.95, 0.95);
  for (int i = 0; i < 200; ++i) {
    const double r = rr(rng), u = uu(rng), v = vv(rng);
    const int N = spec.dimension;
    const double w = std::pow(r, N - 1) * phi1(v);
    const auto d = flux_rhs({r, u, w}, p);
    // u'' from differentiating u' = phi1_inv(w / r^{N-1})
    const double q = w / std::pow(r, N - 1);
    const double dq = d.dw / std::pow(r, N - 1) - (N - 1) * w / std::pow(r, N);
    const double upp = std::pow(1.0 + q * q, -1.5) * dq;
    const double lhs = (N - 1) * std::pow(r, N - 2) * v + std::pow(r, N - 1) * upp;
    const double rhs = -std::pow(r, N - 1) *
                       (p.lambda * spec.eval_f(r, u) * h_factor(v) - (N - 1) * v * v * v / r);
    EXPECT_NEAR(lhs, rhs, 1e-8);
    EXPECT_NEAR(upp, quasilinear_second_derivative(r, u, v, p), 1e-8);
  }
}

TEST(OriginStartup, Examples) {
  auto p = linear_params(3, 1.0);
  const auto z = origin_startup(0.0, p, 1e-6);
  EXPECT_EQ(z.u, 0.0);
  EXPECT_EQ(z.w, 0.0);

  auto p0 = linear_params(3, 0.0);
  const auto c = origin_startup(0.3, p0, 1e-6);
  EXPECT_EQ(c.u, 0.3);
  EXPECT_EQ(c.w, 0.0);

  const auto s = origin_startup(0.1, p, 1e-3);
  EXPECT_NEAR(s.w, -0.1e-9 / 3, 1e-22);
  EXPECT_NEAR(s.u, 0.1 - 1.6666666666666667e-8, 1e-15);
  EXPECT_THROW(origin_startup(0.1, p, 0.0), Error);
}

TEST(OriginStartup, MatchesFineIntegrationFromNearOrigin) {
  // independent route: integrate the flux system with an explicit fixed-step RK4 from
  // r = 1e-6 (constant start) to r = 1e-3 and compare with the Taylor state
  auto p = linear_params(3, 1.0);
  double r = 1e-6, u = 0.1, w = 0.0;
  const int steps = 20000;
  const double h = (1e-3 - r) / steps;
  auto f = [&](double rr, double uu, double ww) {
    const auto d = flux_rhs({rr, uu, ww}, p);
    return std::pair{d.du, d.dw};
  };
  for (int i = 0; i < steps; ++i) {
    auto [a1, b1] = f(r, u, w);
    auto [a2, b2] = f(r + h / 2, u + h / 2 * a1, w + h / 2 * b1);
    auto [a3, b3] = f(r + h / 2, u + h / 2 * a2, w + h / 2 * b2);
    auto [a4, b4] = f(r + h, u + h * a3, w + h * b3);
    u += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    w += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    r += h;
  }
  const auto s = origin_startup(0.1, p, 1e-3);
  EXPECT_NEAR(s.u, u, 1e-12);
  EXPECT_NEAR(s.w, w, 1e-14);
}

TEST(DenseOutput, FourthOrderOnExponential) {
  // y' = y on [0, 1]: dense values agree with exp to the integration tolerance
  StepControl ctl;
  ctl.rel_tol = 1e-10;
  ctl.abs_tol = 1e-12;
  double worst = 0.0;
  dopri5<1>([](double, const Vec<1>& y) { return Vec<1>{y[0]}; }, 0.0, Vec<1>{1.0}, 1.0, ctl, {},
            [&](const DenseSegment<1>& s) {
              for (int j = 0; j <= 10; ++j) {
                const double r = s.r0 + s.h * j / 10;
                worst = std::max(worst, std::abs(s(r)[0] - std::exp(r)));
              }
              return true;
            });
  EXPECT_LT(worst, 1e-9);
}

TEST(DenseOutput, BreakpointsAreStepBoundaries) {
  StepControl ctl;
  std::vector<double> bps{0.3, 0.7};
  std::vector<double> ends;
  const auto fin = dopri5<1>(
      [](double r, const Vec<1>&) { return Vec<1>{r <= 0.3 ? 0.0 : 1.0}; }, 0.0, Vec<1>{0.0}, 1.0,
      ctl, bps, [&](const DenseSegment<1>& s) {
        ends.push_back(s.end());
        return true;
      });
  EXPECT_NE(std::find(ends.begin(), ends.end(), 0.3), ends.end());
  EXPECT_NE(std::find(ends.begin(), ends.end(), 0.7), ends.end());
  EXPECT_NEAR(fin.y[0], 0.7, 1e-12);
}
