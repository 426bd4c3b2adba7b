#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcurv/problem.hpp"

using namespace mcurv;

namespace {

ProblemSpec ball(Nonlinearity f, double R = 1.0, int N = 3) {
  ProblemSpec s;
  s.dimension = N;
  s.outer_radius = R;
  s.inner_radius = 0.0;
  s.f = std::move(f);
  return s;
}

}  // namespace

TEST(Hypotheses, SuperlinearPowerHasDegenerateLinearization) {
  const auto rep = validate_hypotheses(ball(Nonlinearity::power_superlinear(Weight::constant(1), 2)));
  EXPECT_TRUE(rep.a1);
  EXPECT_TRUE(rep.a2);
  EXPECT_TRUE(rep.a2_degenerate);
  EXPECT_FALSE(rep.a2_usable());
  EXPECT_FALSE(rep.a3);
}

TEST(Hypotheses, LinearPlusCubic) {
  const auto rep =
      validate_hypotheses(ball(Nonlinearity::linear_plus_cubic(Weight::constant(1), 1)));
  EXPECT_TRUE(rep.a1);
  EXPECT_TRUE(rep.a2);
  EXPECT_FALSE(rep.a2_degenerate);
  EXPECT_FALSE(rep.a3);
}

TEST(Hypotheses, SublinearPowerIsInfiniteAtZero) {
  const auto rep =
      validate_hypotheses(ball(Nonlinearity::power_sublinear(Weight::constant(1), 0.5)));
  EXPECT_TRUE(rep.a1);
  EXPECT_FALSE(rep.a2);
  EXPECT_TRUE(rep.a3);
}

TEST(Hypotheses, SignViolationIsReported) {
  // f = (1 - 2r) s changes sign at r = 1/2
  auto spec = ball(Nonlinearity::linear_plus_cubic(Weight::affine(1, -2), 0));
  const auto rep = validate_hypotheses(spec);
  EXPECT_FALSE(rep.a1);
  EXPECT_GT(rep.worst_r, 0.5);
  EXPECT_TRUE(rep.a2_degenerate);  // negative weight
}

TEST(Hypotheses, CustomTableWithVanishingWeightOnSubinterval) {
  auto spec = ball(Nonlinearity::linear_plus_cubic(
      Weight::table({0.0, 0.4, 0.6, 1.0}, {1.0, 0.0, 0.0, 1.0}), 0.0));
  const auto rep = validate_hypotheses(spec);
  EXPECT_TRUE(rep.a2);
  EXPECT_TRUE(rep.a2_degenerate);
}

TEST(Hypotheses, RejectsMalformedDomain) {
  auto spec = ball(Nonlinearity::linear_plus_cubic(Weight::constant(1), 0));
  spec.inner_radius = 1.0;
  EXPECT_THROW(validate_hypotheses(spec), Error);
  spec.inner_radius = 0.0;
  spec.alpha = 1.0;
  EXPECT_THROW(validate_hypotheses(spec), Error);
  spec.alpha = kInfinity;
  EXPECT_THROW(validate_hypotheses(spec, 8), Error);
}

TEST(EvalF, FamilyValues) {
  const auto lin = ball(Nonlinearity::linear_plus_cubic(Weight::constant(1), 0));
  EXPECT_DOUBLE_EQ(lin.eval_f(0.5, 0.3), 0.3);
  const auto sq = ball(Nonlinearity::power_superlinear(Weight::constant(1), 2));
  EXPECT_DOUBLE_EQ(sq.eval_f(0.5, -0.4), -0.16000000000000003);
  EXPECT_NEAR(sq.eval_f(0.5, -0.4), -0.16, 1e-15);
  for (const auto& s : {lin, sq, ball(Nonlinearity::power_sublinear(Weight::constant(2), 0.3))})
    EXPECT_EQ(s.eval_f(0.25, 0.0), 0.0);
}

TEST(EvalF, DomainErrorOutsideAlpha) {
  auto spec = ball(Nonlinearity::linear_plus_cubic(Weight::constant(1), 0));
  spec.alpha = 2.0;
  EXPECT_NO_THROW(spec.eval_f(0.1, 1.9));
  EXPECT_THROW(spec.eval_f(0.1, 2.0), Error);
  EXPECT_THROW(spec.eval_f(0.1, -2.5), Error);
}

TEST(EvalF, CustomTableInterpolatesAndExtrapolates) {
  auto f = Nonlinearity::custom(Weight::constant(2), {-1.0, 0.0, 1.0}, {-3.0, 0.0, 1.0});
  EXPECT_DOUBLE_EQ(f(0.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(f(0.0, -0.5), -3.0);
  EXPECT_DOUBLE_EQ(f(0.0, 2.0), 4.0);
  EXPECT_FALSE(f.is_odd());
  EXPECT_TRUE(Nonlinearity::custom(Weight::constant(1), {-1, 0, 1}, {-1, 0, 1}).is_odd());
}

TEST(Truncation, Examples) {
  auto spec = ball(Nonlinearity::linear_plus_cubic(Weight::constant(1), 0));
  const auto t = truncate_f(spec);
  EXPECT_DOUBLE_EQ(t.eval_f(0.3, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(t.eval_f(0.3, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(t.eval_f(0.3, 1.5), 0.5);
  EXPECT_DOUBLE_EQ(t.eval_f(0.3, -1.5), -0.5);
}

TEST(Truncation, AgreesBelowRadiusAndIsContinuous) {
  ProblemSpec spec;
  spec.inner_radius = 0.25;
  spec.f = Nonlinearity::linear_plus_cubic(Weight::affine(1.0, 0.5), 2.0);
  const auto t = truncate_f(spec);
  const double L = spec.span();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> rr(spec.inner_radius, spec.outer_radius), ss(-L, L);
  for (int i = 0; i < 500; ++i) {
    const double r = rr(rng), s = ss(rng);
    EXPECT_EQ(t.eval_f(r, s), spec.eval_f(r, s));
  }
  for (double r : {0.25, 0.6, 1.0}) {
    for (double edge : {L, L + 1.0}) {
      for (double sign : {1.0, -1.0}) {
        const double a = t.eval_f(r, sign * std::nextafter(edge, 0.0));
        const double b = t.eval_f(r, sign * std::nextafter(edge, 10.0));
        EXPECT_NEAR(a, b, 1e-12);
      }
    }
  }
}

TEST(Properties, OddFamiliesAndSignCondition) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rr(0.0, 1.0), ss(-0.99, 0.99);
  const Nonlinearity fams[] = {
      Nonlinearity::linear_plus_cubic(Weight::affine(1, 1), 1),
      Nonlinearity::power_superlinear(Weight::constant(1), 2.5),
      Nonlinearity::power_sublinear(Weight::affine(0.5, 1), 0.5),
  };
  for (const auto& f : fams) {
    for (int i = 0; i < 300; ++i) {
      const double r = rr(rng), s = ss(rng);
      EXPECT_EQ(f(r, -s), -f(r, s));
      if (s != 0.0) EXPECT_GT(f(r, s) * s, 0.0);
    }
  }
}

TEST(Modifiers, SlopeCapWeightAndShift) {
  const auto f = Nonlinearity::power_sublinear(Weight::constant(1), 0.5);
  const auto capped = f.slope_capped(4);
  EXPECT_NEAR(capped(0.0, 0.1), 0.2, 1e-15);
  EXPECT_NEAR(capped(0.0, 0.5), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(*capped.linear_weight(0.3), 2.0, 1e-15);
  const auto shifted = Nonlinearity::linear_plus_cubic(Weight::affine(1, 1), 0).radially_shifted(0.25);
  EXPECT_EQ(shifted(0.2, 0.7), 0.0);
  EXPECT_DOUBLE_EQ(shifted(0.35, 0.5), 0.5 * 1.1);
  EXPECT_DOUBLE_EQ(*shifted.linear_weight(0.35), 1.1);
  ASSERT_EQ(shifted.radial_breakpoints().size(), 1u);
}

TEST(NodalSignatureType, RejectsZeroK) {
  EXPECT_THROW(NodalSignature(0, Sign::Plus), Error);
  EXPECT_EQ(NodalSignature(3, Sign::Minus).last_arch(), Sign::Minus);
  EXPECT_EQ(NodalSignature(2, Sign::Minus).last_arch(), Sign::Plus);
}
