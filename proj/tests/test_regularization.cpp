#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mcurv/regularization.hpp"

using namespace mcurv;

namespace {

ProblemSpec sublinear(double delta = 0.1) {
  ProblemSpec s;
  s.inner_radius = delta;
  s.f = Nonlinearity::power_sublinear(Weight::constant(1), 0.5);
  return s;
}

ProblemSpec ball_cubic() {
  ProblemSpec s;
  s.f = Nonlinearity::linear_plus_cubic(Weight::constant(1), 1);
  return s;
}

}  // namespace

TEST(FN, Examples) {
  const auto s4 = build_f_n(sublinear(), 4);
  EXPECT_NEAR(s4.f(0.5, 0.1), 0.2, 1e-15);
  EXPECT_NEAR(s4.f(0.5, 0.5), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(s4.f(0.5, 0.25), 0.5, 1e-15);
  EXPECT_NEAR(s4.f(0.5, std::nextafter(0.25, 1.0)), 0.5, 1e-12);
  EXPECT_NEAR(*s4.f.linear_weight(0.3), 2.0, 1e-15);
  EXPECT_THROW(build_f_n(sublinear(), 0), Error);
}

TEST(FN, AgreesWithBaseAwayFromZero) {
  const auto base = sublinear();
  for (int n : {4, 16, 64}) {
    const auto sn = build_f_n(base, n);
    for (double s : {0.3, -0.3, 0.9}) EXPECT_EQ(sn.f(0.4, s), base.f(0.4, s));
  }
}

TEST(FN, EigenvaluesFollowHomogeneity) {
  // m^[n] = sqrt(n), so lambda_k(m^[n]) = lambda_k(1) / sqrt(n)
  const WeightFn one = [](double) { return 1.0; };
  const double l1 = eigen_prufer(one, 3, 0.1, 1.0, 1)[0];
  double prev = kInfinity;
  for (int n : {4, 16, 64, 256}) {
    const double ln = eigen_prufer(build_f_n(sublinear(), n), 1)[0];
    EXPECT_NEAR(ln * std::sqrt(static_cast<double>(n)) / l1, 1.0, 1e-9);
    EXPECT_LT(ln, prev);
    prev = ln;
  }
}

TEST(GN, Examples) {
  const auto base = ball_cubic();
  const int n = 4;
  const auto g = build_g_n(base, n);
  EXPECT_EQ(g.inner_radius, 0.25);
  EXPECT_EQ(g.f(1.0 / (2 * n), 0.7), 0.0);
  EXPECT_DOUBLE_EQ(g.f(0.25 + 0.1, 0.3), base.f(0.1, 0.3));
  EXPECT_DOUBLE_EQ(g_n_junction_mismatch(base, 0.5), 0.625);
  EXPECT_THROW(build_g_n(sublinear(), 4), Error);
  EXPECT_THROW(build_g_n(base, 1), Error);
}

TEST(YN, ExtensionSolvesBallProblem) {
  const auto base = ball_cubic();
  for (int n : {4, 16}) {
    const auto g = build_g_n(base, n);
    const double lambda = 1.5 * eigen_prufer(g, 1)[0];
    const auto sols = solve_all(lambda, g, NodalSignature(1, Sign::Plus), default_amplitude_grid(g, 64));
    ASSERT_FALSE(sols.solutions.empty());
    const auto& p = sols.solutions.front();
    const auto e = extend_y_n(p, g);
    EXPECT_LT(e.c1_jump, 1e-10);
    EXPECT_LT(e.residual, 1e-8);
    EXPECT_EQ(e.residual_extension, 0.0);
    EXPECT_EQ(e.sup_u, p.sup_u);
    EXPECT_EQ(e.r.front(), 0.0);
    EXPECT_EQ(e.u.front(), p.trajectory.u(g.inner_radius));
    // the right-hand second derivative at 1/n is -lambda f(0, u(1/n))
    EXPECT_NEAR(e.second_derivative_jump, lambda * base.f(0.0, p.d), 1e-8 * lambda);
  }
}

TEST(YN, RejectsBallProfile) {
  const auto spec = ball_cubic();
  const auto s = seed_from_eigenvalue(spec, 1, Sign::Plus);
  EXPECT_THROW(extend_y_n(s.profile, spec), Error);
}

TEST(NodalFamilies, SublinearNodalFamiliesDecay) {
  const auto spec = sublinear();
  const auto st = limit_study_nodal_families(spec, 1.0, 6, default_amplitude_grid(spec, 160));
  ASSERT_EQ(st.rows.size(), 12u);
  EXPECT_TRUE(st.all_found());
  EXPECT_TRUE(st.decay_holds());
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(st.rows[i].d, -st.rows[i + 6].d, 1e-8);
    EXPECT_NEAR(st.rows[i].c1_norm, st.rows[i + 6].c1_norm, 1e-8);
  }
}

TEST(NodalFamilies, EventuallyDecreasingRule) {
  EXPECT_TRUE(eventually_decreasing({1.0, 2.0, 1.5, 1.0, 0.5}));
  EXPECT_FALSE(eventually_decreasing({1.0, 2.0, 1.5, 1.6}));
  EXPECT_FALSE(eventually_decreasing({1.0, 2.0, 3.0}));
}

TEST(SlopeCapLadder, EigenvaluesAndBranchInfimumShrink) {
  const auto rows = limit_study_slope_cap(sublinear(), 1, Sign::Plus, {4, 16, 64});
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_TRUE(rows[i].error.empty()) << rows[i].error;
    EXPECT_LE(rows[i].branch_min_lambda, rows[i].eigenvalue * (1 + 1e-6));
    EXPECT_GT(rows[i].branch_points, 10u);
    if (i > 0) {
      EXPECT_LT(rows[i].eigenvalue, rows[i - 1].eigenvalue);
      EXPECT_LT(rows[i].branch_min_lambda, rows[i - 1].branch_min_lambda);
    }
  }
}

TEST(ShiftLadder, DifferencesShrink) {
  const WeightFn one = [](double) { return 1.0; };
  const auto rows = shift_family_ladder(one, 3, 1.0, 2, {4, 16, 64, 256, 1024});
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_LT(rows[i].difference, rows[i - 1].difference);
  EXPECT_LT(std::abs(rows.back().eigenvalue - 4 * std::numbers::pi * std::numbers::pi), 1e-4);
}
