#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"
#include "tripwell/scans.hpp"

using namespace tripwell;
using tripwell::testing::rel;
using tripwell::testing::uniform;

TEST(Grid, AxisValues) {
  const GridAxis closed{"x", 0.0, 1.0, 5, true};
  EXPECT_EQ(closed.values(), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  const GridAxis open{"t", 0.0, 2.0, 4, false};
  EXPECT_EQ(open.values(), (std::vector<double>{0.0, 0.5, 1.0, 1.5}));
  EXPECT_THROW((GridAxis{"x", 0.0, 1.0, 1, true}.validate()), std::invalid_argument);
  EXPECT_THROW((GridAxis{"x", 1.0, 1.0, 3, true}.validate()), std::invalid_argument);
  EXPECT_THROW(GridSpec{}.validate(), std::invalid_argument);
}

TEST(Grid, UnravelIsRowMajor) {
  const GridSpec g{{{"a", 0, 1, 3, true}, {"b", 0, 3, 4, true}}};
  ASSERT_EQ(g.size(), 12u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto idx = g.unravel(i * 4 + j);
      EXPECT_EQ(idx[0], i);
      EXPECT_EQ(idx[1], j);
      const auto p = g.point(i * 4 + j);
      EXPECT_DOUBLE_EQ(p[0], 0.5 * i);
      EXPECT_DOUBLE_EQ(p[1], 1.0 * j);
    }
  }
  const GridSpec e = effective_phase_grid(9);
  EXPECT_EQ(e.axes[0].value(8), kTwoPi);
}

TEST(Argmin, BruteForceWithTies) {
  EXPECT_FALSE(argmin_finite({}).has_value());
  EXPECT_FALSE(argmin_finite({kInf, kInf}).has_value());
  EXPECT_EQ(*argmin_finite({3.0, 1.0, 2.0, 1.0}), 1u);
  EXPECT_EQ(*argmin_finite({kInf, 2.0, std::nan(""), 2.0, -kInf}), 1u);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(40);
    for (auto& x : v) x = std::round(uniform(0, 5));
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] < v[best]) best = i;
    EXPECT_EQ(*argmin_finite(v), best);
  }
}

TEST(LocalMinima, StrictInteriorOnly) {
  EXPECT_EQ(interior_local_minima({0, 1, 0, 1, 1, 2, 1, 3, 0}), (std::vector<std::size_t>{2, 6}));
  EXPECT_TRUE(interior_local_minima({1, 0}).empty());
  EXPECT_TRUE(interior_local_minima({2, 1, 1, 2}).empty());
  EXPECT_TRUE(interior_local_minima({2, kInf, 3}).empty());
}

TEST(Landscape, ValueAtGAndSymmetry) {
  const int n = 6;
  const auto s = theta_landscape(kOptimalTau, n, effective_phase_grid(31));
  EXPECT_EQ(s.payload.size(), 31u * 31u);
  EXPECT_NEAR(s.metadata["point_G"]["ln_Delta"].get<double>(), std::log(1.0 / (n * n)), 1e-9);
  EXPECT_LE(s.min_value(), s.metadata["point_G"]["ln_Delta"].get<double>() + 1e-12);
  for (std::size_t i = 0; i < 31; ++i) {
    for (std::size_t j = 0; j < 31; ++j) {
      const double a = s.payload[i * 31 + j], b = s.payload[j * 31 + i];
      if (std::isfinite(a) || std::isfinite(b)) {
        EXPECT_NEAR(a, b, 1e-9);
      }
    }
  }
  EXPECT_THROW(theta_landscape(kRotationPeriod, n, effective_phase_grid(11)), NumericalError);
  EXPECT_THROW(theta_landscape(0.0, n, effective_phase_grid(11)), NumericalError);
}

TEST(Landscape, IndependentOfWorkerCount) {
  const auto a = theta_landscape(0.2 * std::numbers::pi, 9, effective_phase_grid(41), 1);
  const auto b = theta_landscape(0.2 * std::numbers::pi, 9, effective_phase_grid(41), 4);
  EXPECT_EQ(a.payload, b.payload);
  EXPECT_EQ(a.argmin, b.argmin);
  EXPECT_EQ(a.metadata.dump(), b.metadata.dump());
}

TEST(DeltaOfTau, DeterministicAndSkipsSingularTimes) {
  const GridAxis tau{"tau", 0.0, kRotationPeriod, 24, false};
  const auto a = delta_of_tau(6, tau, effective_phase_grid(21), 1, 1);
  const auto b = delta_of_tau(6, tau, effective_phase_grid(21), 3, 1);
  EXPECT_EQ(a.payload, b.payload);
  EXPECT_TRUE(std::isinf(a.payload[0]));
  EXPECT_EQ(a.extra_columns.size(), 2u);
  for (std::size_t k = 1; k < a.payload.size(); ++k) EXPECT_TRUE(std::isfinite(a.payload[k])) << k;
}

TEST(Refinement, RoundMinimaNeverIncrease) {
  for (int n : {4, 11}) {
    for (double tau : {0.3, kOptimalTau, 1.7}) {
      const auto k = RotatedNoonKernel::ideal(make_basis(n), tau);
      const auto opt = minimize_trace_inverse(k, effective_phase_grid(25), 3);
      ASSERT_EQ(opt.round_minima.size(), 4u);
      for (std::size_t r = 1; r < opt.round_minima.size(); ++r) EXPECT_LE(opt.round_minima[r], opt.round_minima[r - 1]);
      EXPECT_EQ(opt.trace_inverse, opt.round_minima.back());
      EXPECT_NEAR(precision(k.cfim_effective(opt.eff1, opt.eff2)), opt.trace_inverse, 0.0);
      EXPECT_GE(opt.trace_inverse, qfim_bound(n) - 1e-12);
    }
  }
  const auto singular = RotatedNoonKernel::ideal(make_basis(4), 0.0);
  const auto opt = minimize_trace_inverse(singular, effective_phase_grid(5), 2);
  EXPECT_TRUE(std::isinf(opt.trace_inverse));
  EXPECT_EQ(opt.round_minima.size(), 1u);
}

TEST(Lambda, ZeroOffsetAndSmallOffsets) {
  const auto rows = lambda_convergence(6, {0.0, 1e-4, 0.05}, effective_phase_grid(31));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].lambda_plus, 0.0);
  EXPECT_EQ(rows[0].lambda_minus, 0.0);
  EXPECT_LE(std::abs(rows[1].lambda_plus), 1e-3);
  EXPECT_LE(std::abs(rows[1].lambda_minus), 1e-3);
  EXPECT_GE(rows[2].lambda_plus, -1e-9);
  EXPECT_GE(rows[2].lambda_minus, -1e-9);
}

TEST(Scaling, RowsBracketTheClosedForm) {
  const auto rows = scaling_study({3, 5, 8}, kOptimalTau, effective_phase_grid(61), 2, 2);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.error.empty());
    EXPECT_LE(rel(r.trace_inverse_at_g, 4.0 / (r.N * r.N)), 1e-9) << r.N;
    EXPECT_LE(r.min_trace_inverse, r.trace_inverse_at_g * (1 + 1e-12)) << r.N;
    EXPECT_GE(r.scaled_min(), 3.0 - 1e-9) << r.N;
  }
  EXPECT_THROW(scaling_study({}, kOptimalTau, effective_phase_grid(5)), std::invalid_argument);
}

TEST(Robustness, ZeroResidualMatchesIdeal) {
  const auto rows = robustness_sweep(9, 10.0, kOptimalTau, {-0.1, 0.0}, effective_phase_grid(31), 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[1].error.empty());
  EXPECT_NEAR(rows[1].precision_ratio, 1.0, 1e-9);
  EXPECT_NEAR(rows[1].delta_ratio, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(rows[0].scaled_interaction, -0.09);
  EXPECT_LT(rows[0].precision_ratio, 1.0 + 1e-9);
  EXPECT_THROW(robustness_sweep(3, 0.0, kOptimalTau, {0.0}, effective_phase_grid(5)), std::invalid_argument);
}

TEST(Slope, RecoversLinearTrend) {
  std::vector<double> x, y;
  for (int i = 0; i <= 20; ++i) {
    x.push_back(0.1 * i);
    y.push_back(i <= 10 ? 3.0 * x.back() + 1.0 : -2.0 * x.back());
  }
  EXPECT_NEAR(fitted_slope(x, y, 0.0, 1.0), 3.0, 1e-12);
  EXPECT_NEAR(fitted_slope(x, y, 1.1, 2.0), -2.0, 1e-12);
  y[3] = kInf;
  EXPECT_NEAR(fitted_slope(x, y, 0.0, 1.0), 3.0, 1e-12);
  EXPECT_THROW(fitted_slope(x, y, 5.0, 6.0), std::invalid_argument);
}
