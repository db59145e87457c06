#include "vlift/jump_lift.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <gtest/gtest.h>

#include <algorithm>

using namespace vlift;

namespace {

std::shared_ptr<const AtomicMatrixMeasure> scalar_measure(double x, double w) {
  return std::make_shared<AtomicMatrixMeasure>(std::vector<double>{x}, std::vector<Matrix>{Matrix::Constant(1, 1, w)});
}

JumpMeasureSpec scalar_spec(double xi, double m) {
  JumpMeasureSpec s;
  s.atoms = {Matrix::Constant(1, 1, xi)};
  s.weights = {Matrix::Constant(1, 1, m)};
  return s;
}

std::shared_ptr<const AtomicMatrixMeasure> hawkes_measure() {
  Matrix w1 = Matrix::Zero(2, 2), w2 = Matrix::Zero(2, 2);
  w1.diagonal() << 0.3, 0.2;
  w2.diagonal() << 0.5, 0.8;
  return std::make_shared<AtomicMatrixMeasure>(std::vector<double>{1.0, 4.0}, std::vector<Matrix>{w1, w2});
}

std::vector<Matrix> hawkes_lambda0() {
  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
  a.diagonal() << 0.6, 0.4;
  b.diagonal() << 0.2, 0.5;
  return {a, b};
}

// outputs: counts per atom, int V (rate-weighted) per atom, V_T entries
struct CompensatorSim {
  JumpPathSimulator sim;
  JumpPath path;
  std::size_t dimension() const { return 2 * sim.spec().size(); }
  Randomness randomness() const { return Randomness::Mixed; }
  void simulate(PathRng& rng, double* out) {
    sim.run(rng, path);
    const std::size_t m = sim.spec().size();
    for (std::size_t r = 0; r < m; ++r) {
      out[r] = static_cast<double>(path.counts.back()[r]);
      out[m + r] = (path.X.back() - path.X.front() - jump_total(r)).cwiseProduct(sim.spec().weights[r]).sum() /
                   sim.spec().truncated_norm(r);
    }
  }
  // int V is X minus the accumulated jump sizes
  Matrix jump_total(std::size_t) const {
    Matrix acc = Matrix::Zero(path.X[0].rows(), path.X[0].cols());
    for (const auto& ev : path.jumps) acc += sim.spec().atoms[ev.atom];
    return acc;
  }
};

}  // namespace

TEST(JumpSpec, Validation) {
  auto s = scalar_spec(1.0, 0.3);
  EXPECT_NO_THROW(s.validate(1));
  EXPECT_THROW(s.validate(2), std::invalid_argument);
  s.weights.clear();
  EXPECT_THROW(s.validate(1), std::invalid_argument);
  auto neg = scalar_spec(-1.0, 0.3);
  EXPECT_THROW(neg.validate(1), std::invalid_argument);
  JumpMeasureSpec asym;
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.0, 1.0;
  asym.atoms = {a};
  asym.weights = {Matrix::Identity(2, 2)};
  EXPECT_THROW(asym.validate(2), std::invalid_argument);
  auto shift = scalar_spec(1.0, 0.3);
  shift.epsilon_shift = -0.1;
  EXPECT_THROW(shift.validate(1), std::invalid_argument);
}

TEST(JumpSpec, TruncatedFrobeniusRates) {
  JumpMeasureSpec s;
  Matrix small = Matrix::Zero(2, 2);
  small(0, 0) = 0.1;
  s.atoms = {2.0 * Matrix::Identity(2, 2), small};
  s.weights = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  EXPECT_DOUBLE_EQ(s.truncated_norm(0), 1.0);
  EXPECT_DOUBLE_EQ(s.truncated_norm(1), 0.1);
  Matrix v(2, 2);
  v << 1.0, 0.2, 0.2, 3.0;
  const Vector r = intensity(v, s);
  EXPECT_DOUBLE_EQ(r(0), 4.0);
  EXPECT_NEAR(r(1), 40.0, 1e-12);
}

TEST(JumpSpec, HawkesPreset) {
  const auto s = hawkes_jump_spec(3);
  ASSERT_EQ(s.size(), 3u);
  Matrix v = Matrix::Zero(3, 3);
  v.diagonal() << 0.5, 1.5, 2.5;
  const Vector r = intensity(v, s);
  EXPECT_DOUBLE_EQ(r(1), 1.5);
  const auto nu = hawkes_measure();
  EXPECT_NO_THROW(require_hawkes_inputs(*nu, hawkes_lambda0()));
  auto bad = hawkes_lambda0();
  bad[0](0, 1) = bad[0](1, 0) = 0.1;
  EXPECT_THROW(require_hawkes_inputs(*nu, bad), std::invalid_argument);
  AtomicMatrixMeasure full({1.0}, {Matrix::Ones(2, 2)});
  EXPECT_THROW(require_hawkes_inputs(full, {Matrix::Identity(2, 2)}), std::invalid_argument);
}

TEST(DriftFlowTest, ScalarExponentialGrowth) {
  const auto nu = scalar_measure(0.0, 0.5);
  const JumpLiftState s0(nu, {Matrix::Ones(1, 1)});
  const auto s1 = drift_flow_step(s0, 1.0);
  EXPECT_NEAR(s1.V()(0, 0), 2.718281828459045, 1e-8);
  EXPECT_NEAR(s1.x_accum()(0, 0), 1.718281828459045, 1e-8);
  EXPECT_DOUBLE_EQ(s1.t, 1.0);
  EXPECT_THROW(drift_flow_step(s0, 0.0), std::invalid_argument);
}

TEST(DriftFlowTest, MatchesMatrixExponential) {
  Matrix w1(2, 2), w2(2, 2);
  w1 << 0.4, 0.1, 0.1, 0.3;
  w2 << 0.2, -0.05, -0.05, 0.6;
  auto nu = std::make_shared<AtomicMatrixMeasure>(std::vector<double>{0.7, 5.0}, std::vector<Matrix>{w1, w2});
  Matrix l1(2, 2), l2(2, 2);
  l1 << 1.0, 0.3, 0.3, 0.5;
  l2 << 0.2, 0.0, 0.0, 0.4;
  const JumpLiftState s0(nu, {l1, l2});
  const double t = 0.9;
  const auto s1 = drift_flow_step(s0, t);

  // generator assembled entrywise from the componentwise drift, then exponentiated
  const int dim = 12;
  Matrix a = Matrix::Zero(dim, dim);
  for (int col = 0; col < 8; ++col) {
    Vector e = Vector::Zero(8);
    e(col) = 1.0;
    const Matrix L1 = Eigen::Map<Matrix>(e.data(), 2, 2), L2 = Eigen::Map<Matrix>(e.data() + 4, 2, 2);
    const Matrix V = L1 + L2;
    const Matrix d1 = -0.7 * L1 + w1 * V + V * w1, d2 = -5.0 * L2 + w2 * V + V * w2;
    a.block(0, col, 4, 1) = Eigen::Map<const Vector>(d1.data(), 4);
    a.block(4, col, 4, 1) = Eigen::Map<const Vector>(d2.data(), 4);
    a.block(8, col, 4, 1) = Eigen::Map<const Vector>(V.data(), 4);
  }
  Vector s = Vector::Zero(dim);
  Eigen::Map<Matrix>(s.data(), 2, 2) = l1;
  Eigen::Map<Matrix>(s.data() + 4, 2, 2) = l2;
  const Vector expect = Matrix((a * t).exp()) * s;
  EXPECT_LT(max_abs(s1.lambda()[0] - Eigen::Map<const Matrix>(expect.data(), 2, 2)), 1e-10);
  EXPECT_LT(max_abs(s1.lambda()[1] - Eigen::Map<const Matrix>(expect.data() + 4, 2, 2)), 1e-10);
  EXPECT_LT(max_abs(s1.x_accum() - Eigen::Map<const Matrix>(expect.data() + 8, 2, 2)), 1e-10);
}

TEST(DriftFlowTest, StepBound) {
  const auto nu = std::make_shared<AtomicMatrixMeasure>(std::vector<double>{0.1, 50.0},
                                                        std::vector<Matrix>{Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  const DriftFlow f(*nu);
  EXPECT_LE(f.max_substep() * nu->max_node(), 0.1);
  EXPECT_EQ(f.substeps(f.max_substep()), 1u);
  EXPECT_EQ(f.substeps(2.5 * f.max_substep()), 3u);
}

TEST(DriftFlowTest, SemiflowProperty) {
  const auto nu = hawkes_measure();
  const JumpLiftState s0(nu, hawkes_lambda0());
  const auto one = drift_flow_step(s0, 0.8);
  const auto two = drift_flow_step(drift_flow_step(s0, 0.3), 0.5);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LT(max_abs(one.lambda()[i] - two.lambda()[i]), 1e-10);
  EXPECT_LT(max_abs(one.x_accum() - two.x_accum()), 1e-10);
}

TEST(JumpPathTest, EventsConsistent) {
  const auto nu = hawkes_measure();
  const JumpLiftState s0(nu, hawkes_lambda0(), 2);
  const auto spec = hawkes_jump_spec(2);
  JumpPathSimulator sim(s0, spec, 2.0, 0.05);
  JumpPath path;
  std::size_t total = 0;
  for (std::uint64_t p = 0; p < 200; ++p) {
    PathRng rng(9, p);
    sim.run(rng, path);
    ASSERT_EQ(path.V.size(), 41u);
    ASSERT_EQ(path.drift_integral.size(), 40u);
    EXPECT_GE(path.min_eigenvalue_v, -1e-12);
    double prev = 0.0;
    for (const auto& ev : path.jumps) {
      EXPECT_GT(ev.t, prev);
      EXPECT_LE(ev.t, 2.0);
      EXPECT_GT(ev.intensity, 0.0);
      prev = ev.t;
    }
    EXPECT_EQ(path.counts.back()[0] + path.counts.back()[1], path.jumps.size());
    for (const auto& v : path.V) EXPECT_LT(max_abs(v - Matrix(v.diagonal().asDiagonal())), 1e-14);
    total += path.jumps.size();
  }
  EXPECT_GT(total, 0u);
}

TEST(JumpPathTest, IntensityAtJumpIsLeftLimit) {
  // one node, no decay between grid points is needed: V is piecewise exponential
  const auto nu = scalar_measure(2.0, 0.3);
  const JumpLiftState s0(nu, {Matrix::Ones(1, 1)}, 1);
  const auto spec = scalar_spec(1.0, 1.0);
  PathRng rng(4, 4);
  const auto path = simulate_jump_path(s0, spec, 3.0, rng, 0.1);
  ASSERT_FALSE(path.jumps.empty());
  // between jumps lambda' = (-2 + 0.6) lambda; each jump adds 0.6
  double lam = 1.0, t = 0.0;
  for (const auto& ev : path.jumps) {
    lam *= std::exp(-1.4 * (ev.t - t));
    EXPECT_NEAR(ev.intensity, lam, 1e-9);
    lam += 0.6;
    t = ev.t;
  }
  EXPECT_NEAR(path.V.back()(0, 0), lam * std::exp(-1.4 * (3.0 - t)), 1e-9);
}

TEST(JumpPathTest, EpsilonShiftScalesImpact) {
  const auto nu = scalar_measure(2.0, 0.3);
  const JumpLiftState s0(nu, {Matrix::Ones(1, 1)}, 1);
  auto spec = scalar_spec(1.0, 1.0);
  spec.epsilon_shift = 0.5;
  PathRng rng(4, 4);
  const auto path = simulate_jump_path(s0, spec, 3.0, rng, 0.1);
  double lam = 1.0, t = 0.0;
  for (const auto& ev : path.jumps) {
    lam *= std::exp(-1.4 * (ev.t - t));
    EXPECT_NEAR(ev.intensity, lam, 1e-9);
    lam += 0.6 * std::exp(-1.0);
    t = ev.t;
  }
}

TEST(JumpPathTest, ConstantRateIsPoisson) {
  // zero kernel weight: V stays at lambda0 and counts are Poisson(m lambda0 T)
  const auto nu = scalar_measure(0.0, 0.0);
  const JumpLiftState s0(nu, {Matrix::Constant(1, 1, 2.0)}, 1);
  CompensatorSim sim{JumpPathSimulator(s0, scalar_spec(1.0, 0.3), 1.5, 0.1), {}};
  const auto e = run_paths(sim, 40000, 12);
  EXPECT_LE(std::abs(e.z_score(0, 0.9)), 3.0);
  EXPECT_NEAR(e.mean(1), 0.9, 1e-12);
  // Poisson variance equals the mean
  const double var = e.std_error(0) * e.std_error(0) * 40000.0;
  EXPECT_NEAR(var / 0.9, 1.0, 0.05);
}

TEST(JumpPathTest, ScalarHawkesMeanCount) {
  // E[V_t] = exp((-x + 2w + 2 w xi m) t) for one node
  const double x = 1.0, w = 0.4, m = 0.3, T = 1.0;
  const auto nu = scalar_measure(x, w);
  const JumpLiftState s0(nu, {Matrix::Ones(1, 1)}, 1);
  CompensatorSim sim{JumpPathSimulator(s0, scalar_spec(1.0, m), T, 0.05), {}};
  const auto e = run_paths(sim, 40000, 13);
  const double a = -x + 2.0 * w + 2.0 * w * m;
  const double expect = m * (std::exp(a * T) - 1.0) / a;
  EXPECT_LE(std::abs(e.z_score(0, expect)), 3.0);
  EXPECT_LE(std::abs(e.z_score(1, expect)), 3.0);
}

TEST(JumpPathTest, ReproducibleAndBisectionFree) {
  const auto nu = hawkes_measure();
  const JumpLiftState s0(nu, hawkes_lambda0(), 2);
  PathRng a(1, 7), b(1, 7);
  const auto pa = simulate_jump_path(s0, hawkes_jump_spec(2), 1.0, a, 0.05);
  const auto pb = simulate_jump_path(s0, hawkes_jump_spec(2), 1.0, b, 0.05);
  ASSERT_EQ(pa.jumps.size(), pb.jumps.size());
  for (std::size_t i = 0; i < pa.jumps.size(); ++i) EXPECT_EQ(pa.jumps[i].t, pb.jumps[i].t);
  EXPECT_EQ(pa.bisections, 0u);
}

TEST(JumpPathTest, Errors) {
  const auto nu = hawkes_measure();
  const JumpLiftState s0(nu, hawkes_lambda0(), 2);
  EXPECT_THROW(JumpPathSimulator(s0, hawkes_jump_spec(2), 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(JumpPathSimulator(s0, hawkes_jump_spec(2), -1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(JumpPathSimulator(s0, hawkes_jump_spec(3), 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(JumpLiftState(nu, {Matrix::Identity(2, 2)}), std::invalid_argument);
}

TEST(Representation, VolterraProjectionConverges) {
  const auto nu = hawkes_measure();
  const auto lam0 = hawkes_lambda0();
  const JumpLiftState s0(nu, lam0, 2);
  const auto spec = hawkes_jump_spec(2);
  JumpPathSimulator sim(s0, spec, 1.0, 0.0025);
  std::vector<double> gap[3];
  JumpPath path;
  for (std::uint64_t p = 0; p < 30; ++p) {
    PathRng rng(21, p);
    sim.run(rng, path);
    for (int level = 0; level < 3; ++level) {
      const auto coarse = coarsen(path, std::size_t{1} << (2 - level));
      const auto proj = volterra_projection(coarse, *nu, lam0, spec);
      double g = 0.0;
      for (std::size_t j = 0; j < proj.size(); ++j) g = std::max(g, max_abs(proj[j] - coarse.V[j]));
      gap[level].push_back(g);
      EXPECT_LE(g, 0.5 * coarse.grid.dt());
    }
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_LE(median(gap[1]), 0.5 * median(gap[0]));
  EXPECT_LE(median(gap[2]), 0.5 * median(gap[1]));
}

TEST(Representation, CoarsenAggregates) {
  const auto nu = hawkes_measure();
  const JumpLiftState s0(nu, hawkes_lambda0(), 2);
  PathRng rng(2, 2);
  const auto path = simulate_jump_path(s0, hawkes_jump_spec(2), 1.0, rng, 0.05);
  const auto c = coarsen(path, 4);
  EXPECT_EQ(c.grid.steps(), 5u);
  EXPECT_EQ(max_abs(c.V.back() - path.V.back()), 0.0);
  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
  for (const auto& m : path.drift_integral) a += m;
  for (const auto& m : c.drift_integral) b += m;
  EXPECT_LT(max_abs(a - b), 1e-14);
  EXPECT_THROW(coarsen(path, 3), std::invalid_argument);
}
