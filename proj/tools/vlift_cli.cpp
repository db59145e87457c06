#include "vlift/io.hpp"
#include "vlift/validation.hpp"
#include "vlift/vlift.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace vlift;
using io::ConfigError;
using io::Json;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

void add_run_flags(CLI::App* c, RunFlags& r, std::size_t default_paths) {
  r.paths = default_paths;
  c->add_option("--paths", r.paths, "number of Monte Carlo paths")->capture_default_str();
  c->add_option("--seed", r.seed, "random seed")->capture_default_str();
  c->add_option("--workers", r.workers, "worker threads (never changes results)")->capture_default_str()->check(CLI::PositiveNumber);
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    io::write_text(out, text);
}

std::string entry_name(const char* prefix, Eigen::Index a, Eigen::Index b) {
  return std::string(prefix) + "_" + std::to_string(a + 1) + std::to_string(b + 1);
}

std::vector<std::string> matrix_columns(const char* prefix, Eigen::Index rows, Eigen::Index cols) {
  std::vector<std::string> h;
  for (Eigen::Index a = 0; a < rows; ++a)
    for (Eigen::Index b = 0; b < cols; ++b) h.push_back(entry_name(prefix, a, b));
  return h;
}

void append_matrix(std::vector<double>& row, const Matrix& m) {
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
}

std::shared_ptr<const AtomicMatrixMeasure> load_measure(const std::string& path) {
  return std::make_shared<AtomicMatrixMeasure>(io::read_measure(path));
}

OULiftState load_gamma0(const std::string& path, std::shared_ptr<const AtomicMatrixMeasure> nu) {
  return io::gamma0_from(io::read_kv(path), std::move(nu), path);
}

Matrix load_matrix(const std::string& path, const std::string& key) {
  const Json root = io::read_kv(path);
  return io::matrix_from(io::field(root, key, path), path + "." + key);
}

TimeGrid make_grid(double horizon, std::size_t steps, const std::string& what) {
  if (!(horizon > 0.0) || steps == 0) throw ConfigError(what + ": horizon and steps must be positive");
  return TimeGrid::over(horizon, steps);
}

// --- kernel ---------------------------------------------------------------

struct KernelFit {
  std::string hurst, out;
  std::size_t nodes = 20;
  double tmin = 1e-3, tmax = 10.0;

  void run() const {
    auto spec = io::fractional_spec_from(io::read_kv(hurst), hurst);
    spec.node_count = nodes;
    spec.t_min = tmin;
    spec.t_max = tmax;
    const auto fit = fit_fractional_measure(spec);
    io::write_measure(out, fit.measure);
    std::cout << "nodes " << fit.measure.size() << "  sup_rel_error " << fit.sup_rel_error << "  check_points "
              << fit.check_points << "\n";
  }
};

struct KernelEval {
  std::string measure, times, out;

  void run() const {
    const auto nu = io::read_measure(measure);
    const auto ts = io::read_times(times);
    io::CsvWriter w([&] {
      std::vector<std::string> h{"t"};
      for (const auto& c : matrix_columns("K", nu.rows(), nu.cols())) h.push_back(c);
      return h;
    }());
    for (double t : ts) {
      std::vector<double> row{t};
      append_matrix(row, eval_kernel(nu, t));
      w.row(row);
    }
    emit(out, w.str());
  }
};

// --- ou / wishart ---------------------------------------------------------

struct PathGridCmd {
  std::string measure, gamma0, out;
  double dt = 0.01;
  std::size_t steps = 100;
  RunFlags run_flags;

  void run(bool wishart) const {
    const auto g0 = load_gamma0(gamma0, load_measure(measure));
    if (!(dt > 0.0)) throw ConfigError("--dt must be positive");
    const auto grid = make_grid(dt * static_cast<double>(steps), steps, "grid");
    const auto times = grid_times(grid);
    const Eigen::Index n = g0.n(), d = g0.d();
    const std::size_t per = static_cast<std::size_t>(n * d);
    const auto raw = collect_paths(make_ou_simulator(g0, times, per * times.size(), FlattenX{}), run_flags.paths,
                                   run_flags.seed, run_flags.workers);
    std::vector<std::string> h{"path", "t"};
    for (const auto& c : wishart ? matrix_columns("V", d, d) : matrix_columns("X", n, d)) h.push_back(c);
    io::CsvWriter w(h);
    for (std::size_t p = 0; p < raw.size(); ++p)
      for (std::size_t j = 0; j < times.size(); ++j) {
        std::vector<double> row{static_cast<double>(p), times[j]};
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
            raw[p].data() + j * per, n, d);
        append_matrix(row, wishart ? wishart_from_x(x) : Matrix(x));
        w.row(row);
      }
    emit(out, w.str());
  }
};

struct WishartTransform {
  std::string measure, gamma0, c, times, out;
  RunFlags run_flags;

  void run() const {
    const auto g0 = load_gamma0(gamma0, load_measure(measure));
    const Json croot = io::read_kv(c);
    auto cs = io::matrices_from(io::field(croot, "c", c), c + ".c");
    const auto ts = io::read_times(times);
    if (cs.size() == 1) cs.assign(ts.size(), cs[0]);
    if (cs.size() != ts.size()) throw ConfigError(c + ".c: give one matrix or one per time");
    for (const auto& m : cs)
      if (m.rows() != g0.n() || m.cols() != g0.d()) throw ConfigError(c + ".c: expected n x d matrices");
    for (double t : ts)
      if (!(t > 0.0)) throw ConfigError(times + ": times must be positive");
    std::vector<double> record(ts);
    std::sort(record.begin(), record.end());
    record.erase(std::unique(record.begin(), record.end()), record.end());
    WishartLaplaceFunctional f;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      f.u.push_back(cs[j].transpose() * cs[j]);
      f.time_index.push_back(static_cast<std::size_t>(std::find(record.begin(), record.end(), ts[j]) - record.begin()));
    }
    const auto e = run_paths(make_ou_simulator(g0, record, ts.size(), f), run_flags.paths, run_flags.seed,
                             run_flags.workers);
    Json entries = Json::array();
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const double a = closed_form_laplace({ts[j], cs[j], g0});
      const auto i = static_cast<Eigen::Index>(j);
      const double z = e.std_error(i) > 0.0 ? (e.mean(i) - a) / e.std_error(i) : 0.0;
      entries.push_back({{"t", ts[j]}, {"analytic", a}, {"mc", e.mean(i)}, {"stderr", e.std_error(i)}, {"z_score", z}});
    }
    Json rep{{"paths", run_flags.paths}, {"seed", run_flags.seed}, {"entries", entries}};
    io::write_json(out, rep);
    std::cout << io::render_table(entries);
  }
};

// --- hawkes ---------------------------------------------------------------

struct HawkesSimulate {
  std::string preset, measure, lambda0, out, out_grid, jumps;
  double horizon = 1.0, dt = 0.01;
  RunFlags run_flags;

  void run() const {
    const auto nu = load_measure(measure);
    if (nu->shape() != WeightShape::SymmetricD) throw ConfigError(measure + ": jump lift needs symmetric weights");
    const auto l0 = io::lambda0_from(io::read_kv(lambda0), *nu, lambda0);
    JumpMeasureSpec spec;
    if (!jumps.empty()) {
      spec = io::jump_spec_from(io::read_kv(jumps), nu->rows(), jumps);
    } else if (preset == "hawkes") {
      spec = hawkes_jump_spec(nu->rows());
      try {
        require_hawkes_inputs(*nu, l0);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--preset hawkes: ") + e.what());
      }
    } else {
      throw ConfigError("hawkes simulate: give --preset hawkes or --jumps <file>");
    }
    const JumpPathSimulator sim(JumpLiftState(nu, l0, spec.size()), spec, horizon, dt);
    std::vector<JumpPath> paths(run_flags.paths);
    for_each_path(sim, run_flags.paths, run_flags.seed, run_flags.workers,
                  [&](JumpPathSimulator& s, std::size_t p, PathRng& rng) { s.run(rng, paths[p]); });

    io::CsvWriter ev({"path", "t", "atom", "intensity_at_jump"});
    for (std::size_t p = 0; p < paths.size(); ++p)
      for (const auto& j : paths[p].jumps)
        ev.row({static_cast<double>(p), j.t, static_cast<double>(j.atom + 1), j.intensity});
    emit(out, ev.str());

    if (!out_grid.empty()) {
      const Eigen::Index d = nu->rows();
      std::vector<std::string> h{"path", "t"};
      for (const auto& c : matrix_columns("V", d, d)) h.push_back(c);
      for (std::size_t r = 0; r < spec.size(); ++r) h.push_back("N_" + std::to_string(r + 1));
      io::CsvWriter g(h);
      for (std::size_t p = 0; p < paths.size(); ++p)
        for (std::size_t j = 0; j < paths[p].grid.size(); ++j) {
          std::vector<double> row{static_cast<double>(p), paths[p].grid.time(j)};
          append_matrix(row, paths[p].V[j]);
          for (auto n : paths[p].counts[j]) row.push_back(static_cast<double>(n));
          g.row(row);
        }
      g.save(out_grid);
    }
  }
};

// --- transforms -----------------------------------------------------------

struct TransformLaplace {
  std::string model, u, t, out;

  void run() const {
    const auto m = io::jump_model_from(io::read_kv(model), model);
    const Matrix um = load_matrix(u, "u");
    if (um.rows() != m.nu->rows() || um.cols() != m.nu->rows()) throw ConfigError(u + ".u: expected a d x d matrix");
    Json entries = Json::array();
    for (double ti : io::read_times(t)) {
      const auto r = laplace_transform_jump(um, m.lambda0, *m.nu, m.spec, ti, m.steps);
      entries.push_back({{"t", ti}, {"lift", r.lift}, {"volterra", r.volterra}, {"rel_gap", r.discrepancy}});
    }
    io::write_json(out, Json{{"steps", m.steps}, {"entries", entries}});
    std::cout << io::render_table(entries);
  }
};

std::vector<Vector> read_v_points(const std::string& path, Eigen::Index d) {
  const auto tab = io::read_csv(path);
  if (static_cast<Eigen::Index>(tab.header.size()) != d)
    throw ConfigError(path + ": expected " + std::to_string(d) + " columns v_1..v_d");
  std::vector<Vector> out;
  for (const auto& r : tab.rows) out.push_back(Eigen::Map<const Vector>(r.data(), d));
  if (out.empty()) throw ConfigError(path + ": no rows");
  return out;
}

Json v_entry(const Vector& v) {
  Json e = Json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i) e["v_" + std::to_string(i + 1)] = v(i);
  return e;
}

struct TransformCharfn {
  std::string model, v, out;
  double t = 1.0;

  void run() const {
    const auto m = io::heston_model_from(io::read_kv(model), model);
    Json entries = Json::array();
    for (const auto& vi : read_v_points(v, m.d())) {
      const Complex c = char_function(m, vi, t);
      Json e = v_entry(vi);
      e["re"] = c.real();
      e["im"] = c.imag();
      e["modulus"] = std::abs(c);
      entries.push_back(e);
    }
    io::write_json(out, Json{{"t", t}, {"entries", entries}});
    std::cout << io::render_table(entries);
  }
};

// --- heston ---------------------------------------------------------------

struct HestonCmd {
  std::string model, out, v, strikes;
  double maturity = 1.0;
  std::size_t steps = 200, asset = 1;
  RunFlags run_flags;

  HestonModelSpec load() const { return io::heston_model_from(io::read_kv(model), model); }

  void simulate() const {
    const auto m = load();
    const auto grid = make_grid(maturity, steps, "heston simulate");
    const auto recs = simulate_heston(m, grid, run_flags.paths, run_flags.seed, run_flags.workers);
    const Eigen::Index d = m.d();
    std::vector<std::string> h{"path", "t"};
    for (Eigen::Index i = 0; i < d; ++i) h.push_back("P_" + std::to_string(i + 1));
    for (const auto& c : matrix_columns("V", d, d)) h.push_back(c);
    io::CsvWriter w(h);
    for (std::size_t p = 0; p < recs.size(); ++p)
      for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<double> row{static_cast<double>(p), grid.time(j)};
        for (Eigen::Index i = 0; i < d; ++i) row.push_back(recs[p].P[j](i));
        append_matrix(row, recs[p].V[j]);
        w.row(row);
      }
    emit(out, w.str());
  }

  void charfn() const {
    const auto m = load();
    const auto vs = read_v_points(v, m.d());
    auto f = [vs](const PricePathRecord& r, double* o) {
      for (std::size_t j = 0; j < vs.size(); ++j) {
        const double a = vs[j].dot(r.P.back());
        o[2 * j] = std::cos(a);
        o[2 * j + 1] = std::sin(a);
      }
    };
    const auto e = run_paths(make_heston_simulator(m, make_grid(maturity, steps, "heston charfn"), 2 * vs.size(), f),
                             run_flags.paths, run_flags.seed, run_flags.workers);
    Json entries = Json::array();
    for (std::size_t j = 0; j < vs.size(); ++j) {
      const Complex c = char_function(m, vs[j], maturity);
      const auto i = static_cast<Eigen::Index>(2 * j);
      auto z = [&](Eigen::Index k, double a) { return e.std_error(k) > 0.0 ? (e.mean(k) - a) / e.std_error(k) : 0.0; };
      Json en = v_entry(vs[j]);
      en.update(Json{{"analytic_re", c.real()}, {"analytic_im", c.imag()}, {"mc_re", e.mean(i)}, {"mc_im", e.mean(i + 1)},
                     {"stderr_re", e.std_error(i)}, {"stderr_im", e.std_error(i + 1)}, {"z_re", z(i, c.real())},
                     {"z_im", z(i + 1, c.imag())}});
      entries.push_back(en);
    }
    io::write_json(out, Json{{"maturity", maturity}, {"steps", steps}, {"paths", run_flags.paths},
                             {"seed", run_flags.seed}, {"entries", entries}});
    std::cout << io::render_table(entries);
  }

  void price() const {
    const auto m = load();
    if (asset < 1 || static_cast<Eigen::Index>(asset) > m.d()) throw ConfigError("--asset: out of range");
    const auto a = static_cast<Eigen::Index>(asset - 1);
    const auto tab = io::read_csv(strikes);
    std::vector<double> ks;
    for (const auto& r : tab.rows) ks.push_back(r[tab.header.size() == 1 ? 0 : tab.column("strike")]);
    if (ks.empty()) throw ConfigError(strikes + ": no strikes");
    for (double k : ks)
      if (!(k > 0.0)) throw ConfigError(strikes + ": strikes must be positive");
    const auto fp = fourier_price_calls(m, a, ks, maturity);
    auto f = [ks, a](const PricePathRecord& r, double* o) {
      const double s = std::exp(r.P.back()(a));
      for (std::size_t j = 0; j < ks.size(); ++j) o[j] = std::max(s - ks[j], 0.0);
    };
    const auto e = run_paths(make_heston_simulator(m, make_grid(maturity, steps, "heston price"), ks.size(), f),
                             run_flags.paths, run_flags.seed, run_flags.workers);
    io::CsvWriter w({"strike", "maturity", "fourier_price", "mc_price", "mc_stderr"});
    for (std::size_t j = 0; j < ks.size(); ++j)
      w.row({ks[j], maturity, fp[j].price, e.mean(static_cast<Eigen::Index>(j)), e.std_error(static_cast<Eigen::Index>(j))});
    emit(out, w.str());
  }
};

// --- validate / format ----------------------------------------------------

struct Validate {
  std::string config, out;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool seed_set = false;

  void run() const {
    const Json cfg = io::read_kv(config);
    auto [names, opt] = validation::suite_from_config(cfg, config);
    if (paths) opt.paths = paths;
    if (seed_set) opt.seed = seed;
    opt.workers = workers;
    const auto results = validation::run_checks(names, opt);
    const Json rep = validation::report_json(results, opt);
    io::write_json(out, rep);
    Json rows = Json::array();
    for (const auto& r : results) rows.push_back({{"check", r.name}, {"passed", r.passed}, {"entries", r.entries.size()}});
    std::cout << io::render_table(rows);
    for (const auto& r : results) std::cout << "\n[" << r.name << "]\n" << io::render_table(r.entries);
    if (!rep["passed"].get<bool>()) throw CheckFailure("validate: at least one check failed");
  }
};

struct Format {
  std::string in, out;

  void run() const {
    const std::string ext = std::filesystem::path(in).extension().string();
    if (ext == ".json")
      emit(out, io::dump_json(io::read_json(in)));
    else if (ext == ".csv")
      emit(out, io::dump_csv(io::read_csv(in)));
    else
      emit(out, io::dump_kv(io::read_kv(in)));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-valued Volterra processes via Markovian lifts"};
  app.require_subcommand(1);

  auto* kernel = app.add_subcommand("kernel", "fit or evaluate kernel measures");
  kernel->require_subcommand(1);
  KernelFit kfit;
  auto* kf = kernel->add_subcommand("fit", "fit a fractional kernel by an exponential sum");
  kf->add_option("--hurst", kfit.hurst, "config with `hurst = ...`")->required();
  kf->add_option("--nodes", kfit.nodes)->capture_default_str();
  kf->add_option("--tmin", kfit.tmin)->capture_default_str();
  kf->add_option("--tmax", kfit.tmax)->capture_default_str();
  kf->add_option("--out", kfit.out)->required();
  kf->callback([&] { kfit.run(); });
  KernelEval keval;
  auto* ke = kernel->add_subcommand("eval", "evaluate K(t) on a list of times");
  ke->add_option("--measure", keval.measure)->required();
  ke->add_option("--times", keval.times)->required();
  ke->add_option("--out", keval.out);
  ke->callback([&] { keval.run(); });

  auto* ou = app.add_subcommand("ou", "lifted Volterra OU paths");
  ou->require_subcommand(1);
  PathGridCmd ou_cmd, ws_cmd;
  auto grid_opts = [](CLI::App* c, PathGridCmd& g) {
    c->add_option("--measure", g.measure)->required();
    c->add_option("--gamma0", g.gamma0)->required();
    c->add_option("--dt", g.dt)->capture_default_str();
    c->add_option("--steps", g.steps)->capture_default_str();
    c->add_option("--out", g.out);
    add_run_flags(c, g.run_flags, 10);
  };
  auto* ous = ou->add_subcommand("simulate", "simulate X on a uniform grid");
  grid_opts(ous, ou_cmd);
  ous->callback([&] { ou_cmd.run(false); });

  auto* wishart = app.add_subcommand("wishart", "Volterra Wishart process");
  wishart->require_subcommand(1);
  auto* wss = wishart->add_subcommand("simulate", "simulate V = X^T X on a uniform grid");
  grid_opts(wss, ws_cmd);
  wss->callback([&] { ws_cmd.run(true); });
  WishartTransform wt;
  auto* wst = wishart->add_subcommand("transform", "Laplace transform: closed form vs Monte Carlo");
  wst->add_option("--measure", wt.measure)->required();
  wst->add_option("--gamma0", wt.gamma0)->required();
  wst->add_option("--c", wt.c)->required();
  wst->add_option("--times", wt.times)->required();
  wst->add_option("--out", wt.out)->required();
  add_run_flags(wst, wt.run_flags, 10000);
  wst->callback([&] { wt.run(); });

  auto* hawkes = app.add_subcommand("hawkes", "Volterra jump processes");
  hawkes->require_subcommand(1);
  HawkesSimulate hs;
  auto* hss = hawkes->add_subcommand("simulate", "simulate jump times and V on a grid");
  hss->add_option("--preset", hs.preset);
  hss->add_option("--jumps", hs.jumps, "jump measure config (instead of a preset)");
  hss->add_option("--measure", hs.measure)->required();
  hss->add_option("--lambda0", hs.lambda0)->required();
  hss->add_option("--T", hs.horizon)->capture_default_str();
  hss->add_option("--dt", hs.dt, "control grid step")->capture_default_str();
  hss->add_option("--out", hs.out);
  hss->add_option("--out-grid", hs.out_grid);
  add_run_flags(hss, hs.run_flags, 10);
  hss->callback([&] { hs.run(); });

  auto* transform = app.add_subcommand("transform", "analytic transforms from Riccati equations");
  transform->require_subcommand(1);
  TransformLaplace tl;
  auto* tls = transform->add_subcommand("laplace", "E[exp(Tr(u V_t))] of a jump model, two solvers");
  tls->add_option("--model", tl.model)->required();
  tls->add_option("--u", tl.u)->required();
  tls->add_option("--t", tl.t)->required();
  tls->add_option("--out", tl.out)->required();
  tls->callback([&] { tl.run(); });
  TransformCharfn tc;
  auto* tcs = transform->add_subcommand("charfn", "characteristic function of the log-price");
  tcs->add_option("--model", tc.model)->required();
  tcs->add_option("--v", tc.v)->required();
  tcs->add_option("--t", tc.t)->capture_default_str();
  tcs->add_option("--out", tc.out)->required();
  tcs->callback([&] { tc.run(); });

  auto* heston = app.add_subcommand("heston", "multivariate Volterra Heston model");
  heston->require_subcommand(1);
  HestonCmd hsim, hchar, hprice;
  auto heston_opts = [](CLI::App* c, HestonCmd& h, std::size_t paths) {
    c->add_option("--model", h.model)->required();
    c->add_option("--T,--maturity", h.maturity)->capture_default_str();
    c->add_option("--steps", h.steps)->capture_default_str();
    add_run_flags(c, h.run_flags, paths);
  };
  auto* hs1 = heston->add_subcommand("simulate", "simulate (P, V) on a uniform grid");
  heston_opts(hs1, hsim, 10);
  hs1->add_option("--out", hsim.out);
  hs1->callback([&] { hsim.simulate(); });
  auto* hs2 = heston->add_subcommand("charfn", "characteristic function: Riccati vs Monte Carlo");
  heston_opts(hs2, hchar, 20000);
  hs2->add_option("--v", hchar.v)->required();
  hs2->add_option("--out", hchar.out)->required();
  hs2->callback([&] { hchar.charfn(); });
  auto* hs3 = heston->add_subcommand("price", "European calls: Fourier vs Monte Carlo");
  heston_opts(hs3, hprice, 20000);
  hs3->add_option("--strikes", hprice.strikes)->required();
  hs3->add_option("--asset", hprice.asset)->capture_default_str();
  hs3->add_option("--out", hprice.out);
  hs3->callback([&] { hprice.price(); });

  Validate val;
  auto* vs = app.add_subcommand("validate", "run the Monte Carlo vs analytic check suite");
  vs->add_option("--config", val.config)->required();
  vs->add_option("--out", val.out)->required();
  vs->add_option("--paths", val.paths, "override path counts");
  vs->add_option("--seed", val.seed)->each([&](const std::string&) { val.seed_set = true; });
  vs->add_option("--workers", val.workers)->capture_default_str()->check(CLI::PositiveNumber);
  vs->callback([&] { val.run(); });

  Format fmt;
  auto* fs = app.add_subcommand("format", "rewrite a config, CSV or JSON file in canonical form");
  fs->add_option("--in", fmt.in)->required();
  fs->add_option("--out", fmt.out);
  fs->callback([&] { fmt.run(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const CheckFailure& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
