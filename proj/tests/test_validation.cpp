#include "oracles.hpp"
#include "vlift/validation.hpp"

#include <gtest/gtest.h>

using namespace vlift;
using validation::CheckOptions;
using validation::Json;

namespace {

CheckOptions small(std::size_t paths, unsigned workers = 1) {
  CheckOptions o;
  o.paths = paths;
  o.seed = 99;
  o.workers = workers;
  return o;
}

}  // namespace

TEST(ValidationSuite, EmptyListPassesWithNoChecks) {
  const auto r = validation::run_checks({}, small(10));
  EXPECT_TRUE(r.empty());
  const Json rep = validation::report_json(r, small(10));
  EXPECT_TRUE(rep["passed"].get<bool>());
  EXPECT_TRUE(rep["checks"].empty());
}

TEST(ValidationSuite, UnknownCheckIsConfigError) {
  EXPECT_THROW(validation::run_checks({"resolvent", "nope"}, small(10)), io::ConfigError);
}

TEST(ValidationSuite, ConfigParsing) {
  auto [all, o1] = validation::suite_from_config(io::parse_kv("checks = all\n"), "c");
  EXPECT_EQ(all, validation::check_names());
  EXPECT_EQ(o1.paths, 0u);
  auto [some, o2] = validation::suite_from_config(io::parse_kv("checks = [\"resolvent\"]\npaths = 50\nseed = 4\n"), "c");
  EXPECT_EQ(some, std::vector<std::string>{"resolvent"});
  EXPECT_EQ(o2.paths, 50u);
  EXPECT_EQ(o2.seed, 4u);
  EXPECT_THROW(validation::suite_from_config(io::parse_kv("checks = [1]\n"), "c"), io::ConfigError);
  EXPECT_THROW(validation::suite_from_config(io::parse_kv("paths = 5\n"), "c"), io::ConfigError);
  EXPECT_THROW(validation::suite_from_config(io::parse_kv("checks = []\npaths = -5\n"), "c"), io::ConfigError);
}

TEST(ValidationSuite, ScalarWishartMatchesClosedForm) {
  const auto r = validation::check_wishart_scalar(small(20000));
  EXPECT_TRUE(r.passed);
  ASSERT_EQ(r.entries.size(), 3u);
  for (const auto& e : r.entries) {
    const double t = e["t"].get<double>();
    EXPECT_NEAR(e["analytic"].get<double>(), std::pow(1.0 + 2.0 * t, -0.5), 1e-12);
    EXPECT_LE(std::abs(e["z_score"].get<double>()), 3.0);
  }
}

TEST(ValidationSuite, DeterministicChecksPass) {
  const auto res = validation::check_resolvent(small(1));
  EXPECT_TRUE(res.passed);
  EXPECT_LE(res.summary["closed_form_max_error"].get<double>(), 1e-6);
  ASSERT_EQ(res.entries.size(), 4u);
  for (std::size_t i = 1; i < res.entries.size(); ++i) EXPECT_GE(res.entries[i]["ratio"].get<double>(), 2.0);

  const auto frac = validation::check_fractional_fit(small(1));
  EXPECT_TRUE(frac.passed);
  // error on an independent quadrature of the target, k = 20
  for (const auto& e : frac.entries) {
    if (e["nodes"] != 20) continue;
    FractionalKernelSpec spec;
    spec.hurst = Matrix::Constant(1, 1, e["hurst"].get<double>());
    const auto fit = fit_fractional_measure(spec);
    double worst = 0.0;
    for (int i = 0; i <= 60; ++i) {
      const double t = 1e-3 * std::pow(1e4, i / 60.0);
      const double ref = oracle::fractional_kernel(spec.hurst(0, 0), t);
      worst = std::max(worst, std::abs(eval_kernel(fit.measure, t)(0, 0) / ref - 1.0));
    }
    EXPECT_LE(worst, 5e-3);
  }
}

TEST(ValidationSuite, SinglePathFailsAndIsReported) {
  const auto r = validation::run_checks({"compensator"}, small(1));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_FALSE(r[0].passed);
  EXPECT_FALSE(validation::report_json(r, small(1))["passed"].get<bool>());
}

TEST(ValidationSuite, ReportsIndependentOfWorkers) {
  const std::vector<std::string> names = {"wishart_transform", "jump_transform", "representation", "compensator"};
  const auto a = validation::report_json(validation::run_checks(names, small(3000, 1)), small(3000, 1));
  const auto b = validation::report_json(validation::run_checks(names, small(3000, 4)), small(3000, 4));
  EXPECT_EQ(io::dump_json(a), io::dump_json(b));
  const auto c = validation::report_json(validation::run_checks(names, small(3000, 1)), small(3000, 1));
  EXPECT_EQ(io::dump_json(a), io::dump_json(c));
}

TEST(ValidationSuite, BlackScholesHelperMatchesOracle) {
  for (double k : {0.5, 0.9, 1.0, 1.3, 3.0})
    for (double v : {0.0, 1e-4, 0.04, 0.5})
      EXPECT_NEAR(validation::detail::bs_call(1.0, k, v), oracle::bs_call(1.0, k, v), 1e-13);
}

TEST(ValidationSuite, HestonChecksShareOneSimulation) {
  const auto r = validation::run_checks({"heston_charfn", "fourier_pricing"}, small(20000));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_TRUE(r[0].passed) << r[0].to_json().dump();
  EXPECT_TRUE(r[1].passed) << r[1].to_json().dump();
  EXPECT_EQ(r[0].summary["paths"], 20000);
  EXPECT_EQ(r[0].entries.size(), 7u);
  // deterministic variance int_0^2 (0.3 e^{-1.5 s})^2 ds by quadrature
  const double var = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double s) { return 0.09 * std::exp(-3.0 * s); }, 0.0, 2.0);
  for (const auto& e : r[1].entries) {
    if (e["kind"] != "gaussian") continue;
    const double ref = oracle::bs_call(1.0, e["strike"].get<double>(), var);
    EXPECT_NEAR(e["fourier"].get<double>(), ref, 1e-4);
  }
}
