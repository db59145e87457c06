#pragma once

// Monte Carlo versus analytic check suite. Every check returns its numbers as
// JSON; reports depend only on the seed, never on the worker count.

#include "vlift/heston.hpp"
#include "vlift/io.hpp"
#include "vlift/kernel_measure.hpp"
#include "vlift/riccati.hpp"
#include "vlift/wishart.hpp"

#include <algorithm>
#include <optional>
#include <random>

namespace vlift::validation {

using io::Json;

struct CheckOptions {
  std::size_t paths = 0;  // 0 keeps each check's default
  std::uint64_t seed = 20240611;
  unsigned workers = 1;

  std::size_t paths_or(std::size_t fallback) const { return paths ? paths : fallback; }
};

struct CheckResult {
  std::string name;
  bool passed = false;
  Json entries = Json::array();
  Json summary = Json::object();

  Json to_json() const {
    Json j;
    j["name"] = name;
    j["passed"] = passed;
    j["summary"] = summary;
    j["entries"] = entries;
    return j;
  }
};

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {"wishart_transform", "wishart_scalar", "jump_transform",
                                                 "representation",    "compensator",    "resolvent",
                                                 "fractional_fit",    "heston_charfn",  "fourier_pricing"};
  return names;
}

inline double z_limit() { return 3.0; }

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double bs_call(double spot, double strike, double total_variance) {
  if (total_variance <= 0.0) return std::max(spot - strike, 0.0);
  const double s = std::sqrt(total_variance);
  const double d1 = (std::log(spot / strike) + 0.5 * total_variance) / s;
  return spot * normal_cdf(d1) - strike * normal_cdf(d1 - s);
}

inline Matrix random_psd(Eigen::Index d, std::mt19937_64& g, double scale) {
  std::normal_distribution<double> n;
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(g);
  return scale * symmetrize(a * a.transpose()) / static_cast<double>(d);
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& g, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(g);
  return a;
}

inline bool z_ok(double z) { return std::isfinite(z) && std::abs(z) <= z_limit(); }

inline double z_of(const Estimate& e, Eigen::Index i, double target) {
  return e.std_error(i) > 0.0 ? (e.mean(i) - target) / e.std_error(i) : (e.mean(i) == target ? 0.0 : HUGE_VAL);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scenarios

struct WishartScenario {
  OULiftState gamma0;
  std::vector<double> times;   // distinct record times
  std::vector<double> t;       // per test point
  std::vector<Matrix> c;       // per test point
};

/// d = 2, n = 3, k = 4 geometric nodes, random PSD weights and gamma0.
inline WishartScenario wishart_benchmark() {
  std::mt19937_64 g(7);
  std::vector<double> x;
  std::vector<Matrix> w;
  for (int i = 0; i < 4; ++i) {
    x.push_back(0.25 * std::pow(4.0, i));
    w.push_back(detail::random_psd(2, g, 0.5));
  }
  auto nu = std::make_shared<AtomicMatrixMeasure>(x, w);
  std::vector<Matrix> gam;
  for (int i = 0; i < 4; ++i) gam.push_back(detail::random_matrix(3, 2, g, 0.3));
  WishartScenario s{OULiftState(nu, gam), {0.5, 1.0, 2.0}, {0.5, 0.5, 1.0, 1.0, 2.0, 2.0}, {}};
  for (int j = 0; j < 6; ++j) s.c.push_back(detail::random_matrix(3, 2, g, 0.5));
  return s;
}

struct HawkesScenario {
  std::shared_ptr<const AtomicMatrixMeasure> nu;
  std::vector<Matrix> lambda0;
  JumpMeasureSpec spec;
};

/// Scalar benchmark: x = 1, w = 0.4, lambda0 = 1, one atom xi = 1 with weight 0.3.
inline HawkesScenario scalar_hawkes() {
  JumpMeasureSpec s;
  s.atoms = {Matrix::Ones(1, 1)};
  s.weights = {Matrix::Constant(1, 1, 0.3)};
  return {std::make_shared<AtomicMatrixMeasure>(std::vector<double>{1.0}, std::vector<Matrix>{Matrix::Constant(1, 1, 0.4)}),
          {Matrix::Ones(1, 1)}, s};
}

/// Two-dimensional diagonal Hawkes preset.
inline HawkesScenario diagonal_hawkes() {
  Matrix w1 = Matrix::Zero(2, 2), w2 = Matrix::Zero(2, 2), l1 = Matrix::Zero(2, 2), l2 = Matrix::Zero(2, 2);
  w1.diagonal() << 0.3, 0.2;
  w2.diagonal() << 0.5, 0.8;
  l1.diagonal() << 0.6, 0.4;
  l2.diagonal() << 0.2, 0.5;
  HawkesScenario h{std::make_shared<AtomicMatrixMeasure>(std::vector<double>{1.0, 4.0}, std::vector<Matrix>{w1, w2}),
                   {l1, l2}, hawkes_jump_spec(2)};
  require_hawkes_inputs(*h.nu, h.lambda0);
  return h;
}

/// d = 2, n = 2, k = 2, no jumps, rho = (-0.5, 0).
inline HestonModelSpec heston_benchmark() {
  Matrix w1(2, 2), w2(2, 2), g1(2, 2), g2(2, 2);
  w1 << 0.3, 0.05, 0.05, 0.25;
  w2 << 0.4, -0.1, -0.1, 0.3;
  g1 << 0.2, 0.05, 0.0, 0.15;
  g2 << 0.05, 0.0, 0.02, 0.1;
  auto nu = std::make_shared<AtomicMatrixMeasure>(std::vector<double>{0.5, 4.0}, std::vector<Matrix>{w1, w2});
  HestonModelSpec m{OULiftState(nu, {g1, g2}), Vector(2), {}, Vector::Zero(2)};
  m.rho << -0.5, 0.0;
  return m;
}

/// Zero kernel weight: V_t = h(t)^2 deterministic.
inline HestonModelSpec deterministic_heston() {
  auto nu = std::make_shared<AtomicMatrixMeasure>(std::vector<double>{1.5}, std::vector<Matrix>{Matrix::Zero(1, 1)});
  return {OULiftState(nu, {Matrix::Constant(1, 1, 0.3)}), Vector::Constant(1, -0.7), {}, Vector::Zero(1)};
}

// ---------------------------------------------------------------------------
// checks

inline CheckResult check_wishart_transform(const CheckOptions& opt) {
  const auto s = wishart_benchmark();
  WishartLaplaceFunctional f;
  for (std::size_t j = 0; j < s.t.size(); ++j) {
    f.u.push_back(s.c[j].transpose() * s.c[j]);
    f.time_index.push_back(static_cast<std::size_t>(std::find(s.times.begin(), s.times.end(), s.t[j]) - s.times.begin()));
  }
  const std::size_t paths = opt.paths_or(100000);
  const auto e = run_paths(make_ou_simulator(s.gamma0, s.times, s.t.size(), f), paths, opt.seed, opt.workers);
  CheckResult r{"wishart_transform", true};
  for (std::size_t j = 0; j < s.t.size(); ++j) {
    const double analytic = closed_form_laplace({s.t[j], s.c[j], s.gamma0});
    const auto i = static_cast<Eigen::Index>(j);
    const double z = detail::z_of(e, i, analytic);
    r.passed = r.passed && detail::z_ok(z);
    r.entries.push_back({{"t", s.t[j]}, {"analytic", analytic}, {"mc", e.mean(i)}, {"stderr", e.std_error(i)}, {"z_score", z}});
  }
  r.summary = {{"paths", paths}, {"z_limit", z_limit()}};
  return r;
}

inline CheckResult check_wishart_scalar(const CheckOptions& opt) {
  auto nu = std::make_shared<AtomicMatrixMeasure>(std::vector<double>{0.0}, std::vector<Matrix>{Matrix::Ones(1, 1)});
  const OULiftState g0 = OULiftState::zero(nu, 1);
  const std::vector<double> ts = {0.5, 1.0, 2.0};
  WishartLaplaceFunctional f{std::vector<Matrix>(3, Matrix::Ones(1, 1)), {0, 1, 2}};
  const std::size_t paths = opt.paths_or(100000);
  const auto e = run_paths(make_ou_simulator(g0, ts, 3, f), paths, opt.seed, opt.workers);
  CheckResult r{"wishart_scalar", true};
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double exact = 1.0 / std::sqrt(1.0 + 2.0 * ts[j]);
    const double analytic = closed_form_laplace({ts[j], Matrix::Ones(1, 1), g0});
    const auto i = static_cast<Eigen::Index>(j);
    const double z = detail::z_of(e, i, exact);
    const double err = std::abs(analytic - exact);
    r.passed = r.passed && err <= 1e-12 && detail::z_ok(z);
    r.entries.push_back({{"t", ts[j]}, {"exact", exact}, {"analytic", analytic}, {"abs_error", err}, {"mc", e.mean(i)},
                         {"stderr", e.std_error(i)}, {"z_score", z}});
  }
  r.summary = {{"paths", paths}, {"analytic_tolerance", 1e-12}, {"z_limit", z_limit()}};
  return r;
}

namespace detail {

/// exp(u_j V(t_j)) on a scalar jump path; times must lie on the control grid.
struct JumpLaplaceSim {
  JumpPathSimulator sim;
  std::vector<double> u;
  std::vector<std::size_t> index;
  JumpPath path;

  std::size_t dimension() const { return u.size(); }
  Randomness randomness() const { return Randomness::Mixed; }
  void simulate(PathRng& rng, double* out) {
    sim.run(rng, path);
    for (std::size_t j = 0; j < u.size(); ++j) out[j] = std::exp(u[j] * path.V[index[j]](0, 0));
  }
};

/// Per component: N_i(T), int_0^T V_ii, and their difference.
struct CompensatorSim {
  JumpPathSimulator sim;
  JumpPath path;

  std::size_t dimension() const { return 3 * static_cast<std::size_t>(sim.flow().d()); }
  Randomness randomness() const { return Randomness::Mixed; }
  void simulate(PathRng& rng, double* out) {
    sim.run(rng, path);
    const Eigen::Index d = sim.flow().d();
    for (Eigen::Index i = 0; i < d; ++i) {
      double integral = 0.0;
      for (const auto& m : path.drift_integral) integral += m(i, i);
      const double n = static_cast<double>(path.counts.back()[static_cast<std::size_t>(i)]);
      out[3 * i] = n;
      out[3 * i + 1] = integral;
      out[3 * i + 2] = n - integral;
    }
  }
};

}  // namespace detail

inline CheckResult check_jump_transform(const CheckOptions& opt) {
  const auto h = scalar_hawkes();
  const std::vector<double> us = {-0.5, -1.0, -2.0}, ts = {0.5, 1.0};
  const std::size_t steps = 1000;
  const double thinning_dt = 0.05;
  detail::JumpLaplaceSim sim{JumpPathSimulator(JumpLiftState(h.nu, h.lambda0, 1), h.spec, 1.0, thinning_dt), {}, {}, {}};
  for (double u : us)
    for (double t : ts) {
      sim.u.push_back(u);
      sim.index.push_back(static_cast<std::size_t>(std::lround(t / thinning_dt)));
    }
  const std::size_t paths = opt.paths_or(100000);
  const auto e = run_paths(sim, paths, opt.seed, opt.workers);
  CheckResult r{"jump_transform", true};
  std::size_t j = 0;
  for (double u : us)
    for (double t : ts) {
      const auto rep = laplace_transform_jump(Matrix::Constant(1, 1, u), h.lambda0, *h.nu, h.spec, t, steps);
      const double tol = std::max(1e-4, 5.0 * t / static_cast<double>(steps));
      const auto i = static_cast<Eigen::Index>(j++);
      const double z = detail::z_of(e, i, rep.lift);
      r.passed = r.passed && rep.discrepancy <= tol && detail::z_ok(z);
      r.entries.push_back({{"u", u}, {"t", t}, {"lift", rep.lift}, {"volterra", rep.volterra},
                           {"rel_gap", rep.discrepancy}, {"tolerance", tol}, {"mc", e.mean(i)},
                           {"stderr", e.std_error(i)}, {"z_score", z}});
    }
  r.summary = {{"paths", paths}, {"volterra_steps", steps}, {"z_limit", z_limit()}};
  return r;
}

inline CheckResult check_representation(const CheckOptions& opt) {
  const auto h = diagonal_hawkes();
  const std::size_t paths = 100;
  const double fine_dt = 1.0 / 800.0, bound_c = 1.0;
  const std::vector<std::size_t> factors = {8, 4, 2};
  JumpPathSimulator sim(JumpLiftState(h.nu, h.lambda0, 2), h.spec, 1.0, fine_dt);
  std::vector<std::vector<double>> gaps(factors.size());
  JumpPath path;
  for (std::size_t p = 0; p < paths; ++p) {
    PathRng rng(opt.seed, p);
    sim.run(rng, path);
    for (std::size_t l = 0; l < factors.size(); ++l) {
      const auto coarse = coarsen(path, factors[l]);
      const auto proj = volterra_projection(coarse, *h.nu, h.lambda0, h.spec);
      double g = 0.0;
      for (std::size_t m = 0; m < proj.size(); ++m) g = std::max(g, max_abs(proj[m] - coarse.V[m]));
      gaps[l].push_back(g);
    }
  }
  CheckResult r{"representation", true};
  double prev_median = 0.0;
  for (std::size_t l = 0; l < factors.size(); ++l) {
    auto v = gaps[l];
    std::sort(v.begin(), v.end());
    const double median = 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
    const double worst = v.back();
    const double dt = fine_dt * static_cast<double>(factors[l]);
    const double ratio = prev_median > 0.0 ? prev_median / median : 0.0;
    r.passed = r.passed && worst <= bound_c * dt && (l == 0 || ratio >= 2.0);
    r.entries.push_back({{"dt", dt}, {"median_gap", median}, {"max_gap", worst}, {"bound", bound_c * dt},
                         {"median_ratio", ratio}});
    prev_median = median;
  }
  r.summary = {{"paths", paths}, {"bound_constant", bound_c}};
  return r;
}

inline CheckResult check_compensator(const CheckOptions& opt) {
  const auto h = diagonal_hawkes();
  detail::CompensatorSim sim{JumpPathSimulator(JumpLiftState(h.nu, h.lambda0, 2), h.spec, 1.0, 0.05), {}};
  const std::size_t paths = opt.paths_or(100000);
  const auto e = run_paths(sim, paths, opt.seed, opt.workers);
  CheckResult r{"compensator", true};
  for (Eigen::Index i = 0; i < 2; ++i) {
    const double z = detail::z_of(e, 3 * i + 2, 0.0);
    r.passed = r.passed && detail::z_ok(z);
    r.entries.push_back({{"component", i + 1}, {"mean_count", e.mean(3 * i)}, {"mean_integral", e.mean(3 * i + 1)},
                         {"difference", e.mean(3 * i + 2)}, {"stderr", e.std_error(3 * i + 2)}, {"z_score", z}});
  }
  r.summary = {{"paths", paths}, {"horizon", 1.0}, {"z_limit", z_limit()}};
  return r;
}

inline CheckResult check_resolvent(const CheckOptions&) {
  CheckResult r{"resolvent", true};
  {
    const auto grid = TimeGrid::over(1.0, 10000);
    const auto res = resolvent_second_kind(MatrixSeries(grid.size(), Matrix::Ones(1, 1)), grid);
    double err = 0.0;
    for (std::size_t m = 0; m < grid.size(); ++m) err = std::max(err, std::abs(res[m](0, 0) - std::exp(-2.0 * grid.time(m))));
    r.passed = err <= 1e-6;
    r.summary = {{"closed_form_dt", grid.dt()}, {"closed_form_max_error", err}, {"closed_form_tolerance", 1e-6}};
  }
  std::mt19937_64 g(5);
  std::vector<double> x;
  std::vector<Matrix> w;
  for (int i = 0; i < 3; ++i) {
    x.push_back(0.5 * std::pow(3.0, i));
    w.push_back(detail::random_psd(2, g, 0.6));
  }
  const AtomicMatrixMeasure nu(x, w);
  const double bound_c = 10.0;
  double prev = 0.0;
  for (std::size_t n : {100u, 200u, 400u, 800u}) {
    const auto grid = TimeGrid::over(1.0, n);
    const auto k = sample_kernel(nu, grid);
    const double res = resolvent_residual(k, resolvent_second_kind(k, grid), grid);
    const double ratio = prev > 0.0 ? prev / res : 0.0;
    r.passed = r.passed && res <= bound_c * grid.dt() && (prev == 0.0 || ratio >= 2.0);
    r.entries.push_back({{"dt", grid.dt()}, {"residual", res}, {"bound", bound_c * grid.dt()}, {"ratio", ratio}});
    prev = res;
  }
  return r;
}

inline CheckResult check_fractional_fit(const CheckOptions&) {
  CheckResult r{"fractional_fit", true};
  for (double hurst : {0.1, 0.25, 0.4}) {
    double prev = HUGE_VAL;
    for (std::size_t k : {10u, 20u, 40u}) {
      FractionalKernelSpec spec;
      spec.hurst = Matrix::Constant(1, 1, hurst);
      spec.node_count = k;
      const auto fit = fit_fractional_measure(spec);
      const double err = fractional_fit_error(fit.measure, spec.hurst, spec.t_min, spec.t_max, 4000);
      const bool ok = err <= prev && (k != 20 || err <= 5e-3);
      r.passed = r.passed && ok;
      r.entries.push_back({{"hurst", hurst}, {"nodes", k}, {"sup_rel_error", err}});
      prev = err;
    }
  }
  r.summary = {{"t_min", 1e-3}, {"t_max", 10.0}, {"tolerance_k20", 5e-3}, {"check_points", 4000}};
  return r;
}

/// Shared Heston simulation for the characteristic function and pricing checks.
struct HestonBench {
  std::vector<Vector> v;
  std::vector<double> strikes;
  Estimate e;
  std::size_t paths = 0;
  std::size_t steps = 0;
};

inline HestonBench run_heston_bench(const CheckOptions& opt) {
  HestonBench b;
  b.v = {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.5), Eigen::Vector2d(-1.0, 1.0), Eigen::Vector2d(2.0, -1.0),
         Eigen::Vector2d(2.5, 2.5)};
  b.strikes = {0.9, 1.0, 1.1};
  b.paths = opt.paths_or(200000);
  b.steps = 400;
  const auto m = heston_benchmark();
  const auto v = b.v;
  const auto k = b.strikes;
  // cos, sin per v point; exp(P_i) per asset; call payoff per strike on asset 1
  auto f = [v, k](const PricePathRecord& r, double* out) {
    const Vector& p = r.P.back();
    std::size_t o = 0;
    for (const auto& vj : v) {
      const double a = vj.dot(p);
      out[o++] = std::cos(a);
      out[o++] = std::sin(a);
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) out[o++] = std::exp(p(i));
    for (double s : k) out[o++] = std::max(std::exp(p(0)) - s, 0.0);
  };
  b.e = run_paths(make_heston_simulator(m, TimeGrid::over(1.0, b.steps), 2 * v.size() + 2 + k.size(), f), b.paths,
                  opt.seed, opt.workers);
  return b;
}

inline CheckResult check_heston_charfn(const HestonBench& b) {
  const auto m = heston_benchmark();
  CheckResult r{"heston_charfn", true};
  for (std::size_t j = 0; j < b.v.size(); ++j) {
    const Complex c = char_function(m, b.v[j], 1.0);
    const auto i = static_cast<Eigen::Index>(2 * j);
    const double zr = detail::z_of(b.e, i, c.real()), zi = detail::z_of(b.e, i + 1, c.imag());
    r.passed = r.passed && detail::z_ok(zr) && detail::z_ok(zi);
    r.entries.push_back({{"kind", "charfn"}, {"v1", b.v[j](0)}, {"v2", b.v[j](1)}, {"analytic_re", c.real()},
                         {"analytic_im", c.imag()}, {"mc_re", b.e.mean(i)}, {"mc_im", b.e.mean(i + 1)},
                         {"stderr_re", b.e.std_error(i)}, {"stderr_im", b.e.std_error(i + 1)}, {"z_re", zr}, {"z_im", zi}});
  }
  for (Eigen::Index a = 0; a < 2; ++a) {
    const auto i = static_cast<Eigen::Index>(2 * b.v.size()) + a;
    const double target = std::exp(m.p0(a));
    const double z = detail::z_of(b.e, i, target);
    r.passed = r.passed && detail::z_ok(z);
    r.entries.push_back({{"kind", "martingale"}, {"asset", a + 1}, {"target", target}, {"mc", b.e.mean(i)},
                         {"stderr", b.e.std_error(i)}, {"z_score", z}});
  }
  r.summary = {{"paths", b.paths}, {"steps", b.steps}, {"maturity", 1.0}, {"z_limit", z_limit()}};
  return r;
}

inline CheckResult check_fourier_pricing(const HestonBench& b) {
  CheckResult r{"fourier_pricing", true};
  {
    const auto m = deterministic_heston();
    const double t = 2.0;
    // int_0^t (0.3 e^{-1.5 s})^2 ds
    const double var = 0.09 * (1.0 - std::exp(-3.0 * t)) / 3.0;
    const std::vector<double> strikes = {0.8, 1.0, 1.25};
    const auto prices = fourier_price_calls(m, 0, strikes, t);
    for (std::size_t s = 0; s < strikes.size(); ++s) {
      const double ref = detail::bs_call(1.0, strikes[s], var);
      const double err = std::abs(prices[s].price - ref);
      r.passed = r.passed && err <= 1e-4;
      r.entries.push_back({{"kind", "gaussian"}, {"strike", strikes[s]}, {"maturity", t}, {"fourier", prices[s].price},
                           {"reference", ref}, {"abs_error", err}, {"tolerance", 1e-4}});
    }
  }
  const auto m = heston_benchmark();
  const auto prices = fourier_price_calls(m, 0, b.strikes, 1.0);
  const auto base = static_cast<Eigen::Index>(2 * b.v.size() + 2);
  for (std::size_t s = 0; s < b.strikes.size(); ++s) {
    const auto i = base + static_cast<Eigen::Index>(s);
    const double z = detail::z_of(b.e, i, prices[s].price);
    r.passed = r.passed && detail::z_ok(z);
    r.entries.push_back({{"kind", "generic"}, {"strike", b.strikes[s]}, {"maturity", 1.0}, {"fourier", prices[s].price},
                         {"mc", b.e.mean(i)}, {"stderr", b.e.std_error(i)}, {"z_score", z}});
  }
  r.summary = {{"paths", b.paths}, {"steps", b.steps}, {"z_limit", z_limit()}};
  return r;
}

/// Runs the named checks in order. Unknown names are a configuration error.
inline std::vector<CheckResult> run_checks(const std::vector<std::string>& names, const CheckOptions& opt) {
  for (const auto& n : names)
    if (std::find(check_names().begin(), check_names().end(), n) == check_names().end())
      throw io::ConfigError("validate: unknown check '" + n + "'");
  std::optional<HestonBench> bench;
  auto heston = [&]() -> const HestonBench& {
    if (!bench) bench = run_heston_bench(opt);
    return *bench;
  };
  std::vector<CheckResult> out;
  for (const auto& n : names) {
    if (n == "wishart_transform") out.push_back(check_wishart_transform(opt));
    else if (n == "wishart_scalar") out.push_back(check_wishart_scalar(opt));
    else if (n == "jump_transform") out.push_back(check_jump_transform(opt));
    else if (n == "representation") out.push_back(check_representation(opt));
    else if (n == "compensator") out.push_back(check_compensator(opt));
    else if (n == "resolvent") out.push_back(check_resolvent(opt));
    else if (n == "fractional_fit") out.push_back(check_fractional_fit(opt));
    else if (n == "heston_charfn") out.push_back(check_heston_charfn(heston()));
    else if (n == "fourier_pricing") out.push_back(check_fourier_pricing(heston()));
  }
  return out;
}

inline Json report_json(const std::vector<CheckResult>& results, const CheckOptions& opt) {
  Json j;
  j["seed"] = opt.seed;
  j["passed"] = std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
  j["checks"] = Json::array();
  for (const auto& r : results) j["checks"].push_back(r.to_json());
  return j;
}

/// `checks = [...]`, optional `paths`, `seed`.
inline std::pair<std::vector<std::string>, CheckOptions> suite_from_config(const Json& cfg, const std::string& where) {
  std::vector<std::string> names;
  const Json& c = io::field(cfg, "checks", where);
  if (c.is_string() && c == "all") {
    names = check_names();
  } else {
    if (!c.is_array()) throw io::ConfigError(where + ".checks: expected a list of check names or 'all'");
    for (const auto& n : c) {
      if (!n.is_string()) throw io::ConfigError(where + ".checks: names must be strings");
      names.push_back(n.get<std::string>());
    }
  }
  CheckOptions opt;
  if (cfg.contains("paths")) opt.paths = io::count(cfg.at("paths"), where + ".paths");
  if (cfg.contains("seed")) opt.seed = io::count(cfg.at("seed"), where + ".seed");
  return {names, opt};
}

}  // namespace vlift::validation
