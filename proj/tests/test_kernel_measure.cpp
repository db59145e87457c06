#include "oracles.hpp"
#include "vlift/kernel_measure.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vlift;

namespace {

AtomicMatrixMeasure random_measure(int d, int k, std::mt19937_64& g) {
  std::vector<double> x;
  std::vector<Matrix> w;
  for (int i = 0; i < k; ++i) {
    x.push_back(0.3 * std::pow(3.0, i));
    w.push_back(oracle::random_psd(d, g, 0.5));
  }
  return AtomicMatrixMeasure(x, w);
}

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST(Measure, RejectsBadNodes) {
  EXPECT_THROW(AtomicMatrixMeasure({1.0, 1.0}, {m1(1), m1(1)}), std::invalid_argument);
  EXPECT_THROW(AtomicMatrixMeasure({2.0, 1.0}, {m1(1), m1(1)}), std::invalid_argument);
  EXPECT_THROW(AtomicMatrixMeasure({-1.0}, {m1(1)}), std::invalid_argument);
  EXPECT_THROW(AtomicMatrixMeasure({std::nan("")}, {m1(1)}), std::invalid_argument);
  EXPECT_THROW(AtomicMatrixMeasure({1.0, 2.0}, {m1(1), Matrix::Identity(2, 2)}), std::invalid_argument);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  EXPECT_THROW(AtomicMatrixMeasure({1.0}, {asym}), std::invalid_argument);
  EXPECT_NO_THROW(AtomicMatrixMeasure({1.0}, {Matrix::Ones(3, 2)}, WeightShape::GeneralNxD));
}

TEST(Measure, PsdRequirement) {
  AtomicMatrixMeasure ok({0.0, 1.0}, {Matrix::Identity(2, 2), Matrix::Zero(2, 2)});
  EXPECT_NO_THROW(ok.require_psd());
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -0.1;
  AtomicMatrixMeasure bad({1.0}, {neg});
  EXPECT_THROW(bad.require_psd(), std::invalid_argument);
}

TEST(TimeGridTest, UniformSpacing) {
  const auto g = TimeGrid::from_times({0.0, 0.1, 0.2, 0.30000000000000004});
  EXPECT_EQ(g.steps(), 3u);
  EXPECT_THROW(TimeGrid::from_times({0.0, 0.1, 0.25}), std::invalid_argument);
  EXPECT_THROW(TimeGrid::from_times({0.1, 0.2}), std::invalid_argument);
  EXPECT_THROW(TimeGrid(0.0, 3), std::invalid_argument);
}

TEST(EvalKernel, SingleExponential) {
  AtomicMatrixMeasure m({2.0}, {m1(1.0)});
  EXPECT_NEAR(eval_kernel(m, 0.5)(0, 0), 0.36787944117144233, 1e-15);
  EXPECT_THROW(eval_kernel(m, -0.1), std::invalid_argument);
}

TEST(EvalKernel, AtZeroIsTotalMass) {
  std::mt19937_64 g(1);
  const auto m = random_measure(3, 4, g);
  Matrix total = Matrix::Zero(3, 3);
  for (const auto& w : m.weights()) total += w;
  EXPECT_LT(max_abs(eval_kernel(m, 0.0) - total), 1e-14);
}

TEST(EvalKernel, PsdWeightsGivePsdKernel) {
  std::mt19937_64 g(2);
  const auto m = random_measure(3, 5, g);
  for (double t : {0.0, 0.01, 0.3, 1.0, 7.0, 50.0}) {
    const Matrix k = eval_kernel(m, t);
    EXPECT_LT(max_asymmetry(k), 1e-14);
    EXPECT_GE(min_eigenvalue(k), -1e-14);
  }
}

TEST(Semigroup, IdentityAndHalving) {
  std::mt19937_64 g(3);
  const auto m = random_measure(2, 3, g);
  const auto s0 = semigroup_apply(m, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(max_abs(s0.weight(i) - m.weight(i)), 0.0);
  Matrix w(2, 2);
  w << 2, 1, 1, 3;
  const auto h = semigroup_apply(AtomicMatrixMeasure({1.0}, {w}), std::log(2.0));
  EXPECT_LT(max_abs(h.weight(0) - w / 2.0), 1e-15);
  EXPECT_THROW(semigroup_apply(m, -1.0), std::invalid_argument);
}

TEST(Semigroup, LawOnRandomTimes) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const auto m = random_measure(3, 4, g);
  for (int rep = 0; rep < 50; ++rep) {
    const double s = u(g), t = u(g);
    const auto a = semigroup_apply(semigroup_apply(m, s), t);
    const auto b = semigroup_apply(m, s + t);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LT(max_abs(a.weight(i) - b.weight(i)), 1e-12);
  }
}

TEST(FractionalOracle, MatchesPowerLaw) {
  for (double h : {0.1, 0.25, 0.4})
    for (double t : {1e-3, 0.05, 1.0, 10.0}) {
      const double exact = std::pow(t, h - 0.5) / std::tgamma(h + 0.5);
      EXPECT_NEAR(oracle::fractional_kernel(h, t) / exact, 1.0, 1e-10) << h << " " << t;
    }
}

class FractionalFitTest : public ::testing::TestWithParam<double> {};

TEST_P(FractionalFitTest, TwentyNodesWithinTolerance) {
  const double h = GetParam();
  FractionalKernelSpec spec{Matrix::Constant(1, 1, h), 1e-3, 10.0, 20, std::nullopt};
  const auto fit = fit_fractional_measure(spec);
  EXPECT_EQ(fit.measure.size(), 20u);
  EXPECT_LE(fit.sup_rel_error, 5e-3);
  // 10x finer verification grid against the quadrature oracle
  double worst = 0.0;
  const int pts = 4000;
  for (int j = 0; j < pts; ++j) {
    const double t = std::exp(std::log(1e-3) + (std::log(10.0) - std::log(1e-3)) * j / (pts - 1));
    worst = std::max(worst, std::abs(eval_kernel(fit.measure, t)(0, 0) / oracle::fractional_kernel(h, t) - 1.0));
  }
  EXPECT_LE(worst, 5e-3);
  EXPECT_LE(worst, 2.0 * fit.sup_rel_error);
}

TEST_P(FractionalFitTest, ErrorNonincreasingInNodes) {
  const double h = GetParam();
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k : {10u, 20u, 40u}) {
    const auto fit = fit_fractional_measure({Matrix::Constant(1, 1, h), 1e-3, 10.0, k, std::nullopt});
    EXPECT_LE(fit.sup_rel_error, prev) << "k = " << k;
    prev = fit.sup_rel_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Hurst, FractionalFitTest, ::testing::Values(0.1, 0.25, 0.4));

TEST(FractionalFit, DyadicRatio) {
  const auto fit = fit_fractional_measure({Matrix::Constant(1, 1, 0.25), 1e-3, 10.0, 20, std::nullopt});
  for (double t = 1e-3; 2.0 * t <= 10.0; t *= 2.0) {
    const double r = eval_kernel(fit.measure, 2.0 * t)(0, 0) / eval_kernel(fit.measure, t)(0, 0);
    EXPECT_NEAR(r, 0.8408964152537145, 0.8409 * 1.1e-2);
  }
}

TEST(FractionalFit, MatrixHurstEntrywise) {
  Matrix h(2, 2);
  h << 0.1, 0.3, 0.3, 0.4;
  const auto fit = fit_fractional_measure({h, 1e-3, 10.0, 20, std::nullopt});
  EXPECT_LE(fit.sup_rel_error, 5e-3);
  for (double t : {2e-3, 0.1, 5.0}) {
    const Matrix k = eval_kernel(fit.measure, t);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        EXPECT_NEAR(k(a, b) / oracle::fractional_kernel(h(a, b), t), 1.0, 5e-3);
  }
}

TEST(FractionalFit, Rejections) {
  EXPECT_THROW(fit_fractional_measure({Matrix::Constant(1, 1, 0.25), 1e-3, 10.0, 1, std::nullopt}),
               std::invalid_argument);
  EXPECT_THROW(fit_fractional_measure({Matrix::Constant(1, 1, 0.5), 1e-3, 10.0, 20, std::nullopt}),
               std::invalid_argument);
  EXPECT_THROW(fit_fractional_measure({Matrix::Constant(1, 1, 0.25), 0.0, 10.0, 20, std::nullopt}),
               std::invalid_argument);
  Matrix h(2, 2);
  h << 0.1, 0.2, 0.3, 0.1;
  EXPECT_THROW(fit_fractional_measure({h, 1e-3, 10.0, 20, std::nullopt}), std::invalid_argument);
  // infeasible tolerance is reported
  EXPECT_THROW(fit_fractional_measure({Matrix::Constant(1, 1, 0.25), 1e-3, 10.0, 5, 1e-8}), std::runtime_error);
}

TEST(Convolve, ConstantsExact) {
  const auto grid = TimeGrid::over(2.0, 40);
  MatrixSeries one(grid.size(), m1(1.0));
  const auto c = convolve(one, one, grid);
  for (std::size_t m = 0; m < grid.size(); ++m) EXPECT_NEAR(c[m](0, 0), grid.time(m), 1e-13);
}

TEST(Convolve, EqualExponentials) {
  // the integrand exp(-(t-s)) exp(-s) is constant in s, so the rule is exact
  const auto grid = TimeGrid::over(3.0, 50);
  MatrixSeries f;
  for (std::size_t m = 0; m < grid.size(); ++m) f.push_back(m1(std::exp(-grid.time(m))));
  const auto c = convolve(f, f, grid);
  for (std::size_t m = 0; m < grid.size(); ++m)
    EXPECT_NEAR(c[m](0, 0), grid.time(m) * std::exp(-grid.time(m)), 1e-14);
}

TEST(Convolve, ExponentialSecondOrder) {
  double prev = 0.0;
  for (std::size_t n : {50u, 100u, 200u}) {
    const auto grid = TimeGrid::over(3.0, n);
    MatrixSeries f, g;
    for (std::size_t m = 0; m < grid.size(); ++m) {
      f.push_back(m1(std::exp(-grid.time(m))));
      g.push_back(m1(std::exp(-2.0 * grid.time(m))));
    }
    const auto c = convolve(f, g, grid);
    double err = 0.0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const double t = grid.time(m);
      err = std::max(err, std::abs(c[m](0, 0) - (std::exp(-t) - std::exp(-2.0 * t))));
    }
    EXPECT_LT(err, grid.dt() * grid.dt());
    if (prev > 0.0) {
      EXPECT_NEAR(prev / err, 4.0, 0.3);
    }
    prev = err;
  }
}

TEST(Convolve, CommutingSamplesSymmetric) {
  const auto grid = TimeGrid::over(1.0, 100);
  MatrixSeries f, g;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double t = grid.time(m);
    f.push_back(Matrix(Eigen::Vector2d(std::exp(-t), 1.0 + t).asDiagonal()));
    g.push_back(Matrix(Eigen::Vector2d(std::cos(t), std::exp(-2 * t)).asDiagonal()));
  }
  const auto fg = convolve(f, g, grid), gf = convolve(g, f, grid);
  for (std::size_t m = 0; m < grid.size(); ++m) EXPECT_LT(max_abs(fg[m] - gf[m]), grid.dt() * grid.dt());
}

TEST(Convolve, DimensionMismatch) {
  const auto grid = TimeGrid::over(1.0, 4);
  MatrixSeries f(grid.size(), Matrix::Ones(2, 3)), g(grid.size(), Matrix::Ones(2, 2));
  EXPECT_THROW(convolve(f, g, grid), std::invalid_argument);
  EXPECT_THROW(convolve(f, MatrixSeries(3, Matrix::Ones(3, 1)), grid), std::invalid_argument);
}

TEST(Resolvent, ScalarConstantClosedForm) {
  // K = c gives R' = -2 c R, R(0) = c
  for (double c : {0.5, 1.0, 2.0}) {
    const auto grid = TimeGrid::over(1.0, 1000);
    const auto r = resolvent_second_kind(MatrixSeries(grid.size(), m1(c)), grid);
    for (std::size_t m = 0; m < grid.size(); m += 50)
      EXPECT_NEAR(r[m](0, 0), c * std::exp(-2.0 * c * grid.time(m)), 1e-5 * c);
  }
}

TEST(Resolvent, FineGridMatchesToOneInAMillion) {
  const auto grid = TimeGrid::over(1.0, 10000);
  const auto r = resolvent_second_kind(MatrixSeries(grid.size(), m1(1.0)), grid);
  EXPECT_NEAR(r.back()(0, 0), 0.1353352832366127, 1e-6);
}

TEST(Resolvent, ZeroKernel) {
  const auto grid = TimeGrid::over(1.0, 20);
  const auto r = resolvent_second_kind(MatrixSeries(grid.size(), Matrix::Zero(2, 2)), grid);
  for (const auto& m : r) EXPECT_EQ(max_abs(m), 0.0);
}

TEST(Resolvent, DiagonalDecouples) {
  const auto grid = TimeGrid::over(1.0, 200);
  MatrixSeries k, k1, k2;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double t = grid.time(m);
    k.push_back(Matrix(Eigen::Vector2d(std::exp(-t), 0.5 + t).asDiagonal()));
    k1.push_back(m1(std::exp(-t)));
    k2.push_back(m1(0.5 + t));
  }
  const auto r = resolvent_second_kind(k, grid);
  const auto r1 = resolvent_second_kind(k1, grid);
  const auto r2 = resolvent_second_kind(k2, grid);
  for (std::size_t m = 0; m < grid.size(); ++m) {
    EXPECT_NEAR(r[m](0, 0), r1[m](0, 0), 1e-14);
    EXPECT_NEAR(r[m](1, 1), r2[m](0, 0), 1e-14);
    EXPECT_EQ(r[m](0, 1), 0.0);
    EXPECT_EQ(r[m](1, 0), 0.0);
  }
}

TEST(Resolvent, ResidualHalvesWithStep) {
  std::mt19937_64 g(5);
  const auto nu = random_measure(2, 3, g);
  double prev = 0.0;
  for (std::size_t n : {100u, 200u, 400u, 800u}) {
    const auto grid = TimeGrid::over(1.0, n);
    const auto k = sample_kernel(nu, grid);
    const double res = resolvent_residual(k, resolvent_second_kind(k, grid), grid);
    EXPECT_LT(res, 10.0 * grid.dt());
    if (prev > 0.0) {
      EXPECT_LE(res, 0.5 * prev);
    }
    prev = res;
  }
}

TEST(Resolvent, RejectsMismatch) {
  const auto grid = TimeGrid::over(1.0, 4);
  EXPECT_THROW(resolvent_second_kind(MatrixSeries(3, m1(1)), grid), std::invalid_argument);
}

TEST(Resolvent, SingularStepReportsIndex) {
  // A = dt/2 K(0) = -1/2 makes the per-step system 1 + 2A = 0
  const auto grid = TimeGrid::over(1.0, 1);
  try {
    resolvent_second_kind(MatrixSeries(2, m1(-1.0)), grid);
    FAIL() << "expected a singular step";
  } catch (const ResolventError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}
