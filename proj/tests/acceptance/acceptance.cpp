// One PASS/FAIL line per acceptance criterion. Optional argument: path for the
// JSON report of the first run.

#include "vlift/validation.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

using namespace vlift;
using validation::CheckOptions;
using validation::CheckResult;

namespace {

std::string worst_z(const CheckResult& r) {
  double w = 0.0;
  for (const auto& e : r.entries)
    for (const char* k : {"z_score", "z_re", "z_im"})
      if (e.contains(k)) w = std::max(w, std::abs(e[k].get<double>()));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max|z| = %.3f", w);
  return buf;
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

void line(int n, bool ok, const std::string& what, const std::string& detail) {
  std::printf("criterion %2d  %s  %-26s %s\n", n, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string dump_all(const std::vector<CheckResult>& rs, const CheckOptions& o) {
  return io::dump_json(validation::report_json(rs, o));
}

}  // namespace

int main(int argc, char** argv) {
  CheckOptions opt;
  opt.workers = 1;
  bool all_ok = true;
  std::vector<CheckResult> results;

  auto t0 = std::chrono::steady_clock::now();
  results.push_back(validation::check_wishart_transform(opt));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    const bool ok = results.back().passed && secs <= 60.0;
    line(1, ok, "wishart transform", worst_z(results.back()) + fmt(", %.1f s (limit 60 s)", secs));
    all_ok &= ok;
  }

  results.push_back(validation::check_wishart_scalar(opt));
  {
    double err = 0.0;
    for (const auto& e : results.back().entries) err = std::max(err, e["abs_error"].get<double>());
    line(2, results.back().passed, "scalar wishart", worst_z(results.back()) + fmt(", closed form error %.2e", err));
    all_ok &= results.back().passed;
  }

  results.push_back(validation::check_jump_transform(opt));
  {
    double gap = 0.0;
    for (const auto& e : results.back().entries)
      gap = std::max(gap, e["rel_gap"].get<double>() / e["tolerance"].get<double>());
    line(3, results.back().passed, "hawkes transform", worst_z(results.back()) + fmt(", gap/tolerance %.3f", gap));
    all_ok &= results.back().passed;
  }

  results.push_back(validation::check_representation(opt));
  {
    const auto& e = results.back().entries;
    line(4, results.back().passed, "representation",
         fmt("max gap/dt %.3f, median ratios ", e[0]["max_gap"].get<double>() / e[0]["dt"].get<double>()) +
             fmt("%.2f, %.2f", e[1]["median_ratio"].get<double>(), e[2]["median_ratio"].get<double>()));
    all_ok &= results.back().passed;
  }

  results.push_back(validation::check_compensator(opt));
  line(5, results.back().passed, "compensator", worst_z(results.back()));
  all_ok &= results.back().passed;

  results.push_back(validation::check_resolvent(opt));
  {
    const auto& r = results.back();
    line(6, r.passed, "resolvent",
         fmt("closed form error %.2e, finest residual %.2e", r.summary["closed_form_max_error"].get<double>(),
             r.entries.back()["residual"].get<double>()));
    all_ok &= r.passed;
  }

  results.push_back(validation::check_fractional_fit(opt));
  {
    double w = 0.0;
    for (const auto& e : results.back().entries)
      if (e["nodes"] == 20) w = std::max(w, e["sup_rel_error"].get<double>());
    line(7, results.back().passed, "fractional fit", fmt("k = 20 sup error %.2e (limit 5e-3)", w));
    all_ok &= results.back().passed;
  }

  {
    const auto bench = validation::run_heston_bench(opt);
    results.push_back(validation::check_heston_charfn(bench));
    line(8, results.back().passed, "heston charfn", worst_z(results.back()));
    all_ok &= results.back().passed;
    results.push_back(validation::check_fourier_pricing(bench));
    double err = 0.0;
    for (const auto& e : results.back().entries)
      if (e["kind"] == "gaussian") err = std::max(err, e["abs_error"].get<double>());
    line(9, results.back().passed, "fourier pricing", worst_z(results.back()) + fmt(", gaussian error %.2e", err));
    all_ok &= results.back().passed;
  }

  const std::string first = dump_all(results, opt);
  if (argc > 1) io::write_text(argv[1], first);

  {
    const auto names = validation::check_names();
    const std::string rerun = dump_all(validation::run_checks(names, opt), opt);
    CheckOptions eight = opt;
    eight.workers = 8;
    const std::string parallel = dump_all(validation::run_checks(names, eight), opt);
    const bool ok = rerun == first && parallel == first;
    line(10, ok, "determinism",
         std::string("rerun ") + (rerun == first ? "identical" : "differs") + ", workers 8 " +
             (parallel == first ? "identical" : "differs") + fmt(", %.0f bytes", static_cast<double>(first.size())));
    all_ok &= ok;
  }
  return all_ok ? 0 : 1;
}
