#pragma once

// Multivariate Volterra Heston model: V = X^T X from the OU lift and log-prices
//   dP = -diag(V)/2 dt - sum_a (e^{xi_a} - 1 - xi_a) Tr(V m_a) dt + X^T dB
//        + sum_a xi_a (dN_a - Tr(V m_a) dt),        B = W rho + sqrt(1 - rho^T rho) B~.

#include "vlift/ou_lift.hpp"
#include "vlift/riccati.hpp"

#include <functional>

namespace vlift {

struct HestonModelSpec {
  OULiftState gamma0;
  Vector rho;
  std::vector<PriceJump> jumps;
  Vector p0;

  Eigen::Index d() const { return gamma0.d(); }
  Eigen::Index n() const { return gamma0.n(); }
  const AtomicMatrixMeasure& nu() const { return gamma0.measure(); }

  void validate() const {
    const Eigen::Index d = gamma0.d();
    if (rho.size() != d) throw std::invalid_argument("heston: rho must have length d");
    if (p0.size() != d) throw std::invalid_argument("heston: P0 must have length d");
    if (rho.squaredNorm() > 1.0 + 1e-15) throw std::invalid_argument("heston: rho^T rho must be <= 1");
    for (const auto& j : jumps) {
      if (j.xi.size() != d || j.m.rows() != d || j.m.cols() != d)
        throw std::invalid_argument("heston: price jump dimensions must match d");
      if (!j.xi.allFinite()) throw std::invalid_argument("heston: non-finite price jump");
      if (!is_psd(j.m, 1e-12)) throw std::invalid_argument("heston: price jump weight must be PSD");
    }
  }

  JointRiccatiModel riccati_model() const { return {gamma0.measure_ptr(), gamma0.n(), rho, jumps}; }
};

/// Path of one Heston simulation at the grid points.
struct PricePathRecord {
  TimeGrid grid;
  std::vector<Vector> P;
  std::vector<Matrix> V;
  std::vector<JumpEvent> jumps;  // grid-step time, atom, rate
};

/// Exact joint step for (lift, W increment), left-point Euler for P, frozen
/// left-point rates for price jumps. The functional is called as
/// f(const PricePathRecord&, double* out).
template <class Functional>
class HestonSimulator {
 public:
  HestonSimulator(const HestonModelSpec& model, const TimeGrid& grid, std::size_t dim, Functional f)
      : model_(model), grid_(grid), dim_(dim), f_(std::move(f)) {
    model_.validate();
    op_ = std::make_shared<StepOperator>(model.nu(), grid.dt(), true);
    comp_ = std::sqrt(std::max(0.0, 1.0 - model.rho.squaredNorm()) * grid.dt());
    drift_jump_.resize(model.jumps.size());
    for (std::size_t a = 0; a < model.jumps.size(); ++a)
      drift_jump_[a] = model.jumps[a].xi.unaryExpr([](double x) { return std::expm1(x); });
    rec_.grid = grid;
    rec_.P.assign(grid.size(), Vector::Zero(model.d()));
    rec_.V.assign(grid.size(), Matrix::Zero(model.d(), model.d()));
  }

  std::size_t dimension() const { return dim_; }
  Randomness randomness() const { return model_.jumps.empty() ? Randomness::GaussianOnly : Randomness::Mixed; }

  void simulate(PathRng& rng, double* out) {
    const Eigen::Index n = model_.n();
    const Eigen::Index d = model_.d();
    const double dt = grid_.dt();
    g_ = model_.gamma0.stacked();
    Vector p = model_.p0;
    rec_.jumps.clear();
    noise_.resize(n, op_->noise_cols());
    db_.resize(n);
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      x_ = project_stacked(g_, d);
      v_.noalias() = x_.transpose() * x_;
      rec_.P[j] = p;
      rec_.V[j] = v_;
      if (j + 1 == grid_.size()) break;
      rng.fill_gaussian(noise_.data(), static_cast<std::size_t>(noise_.size()));
      op_->advance(g_, noise_, xi_, &dw_);
      rng.fill_gaussian(db_.data(), static_cast<std::size_t>(n));
      db_ = dw_ * model_.rho + comp_ * db_;
      p += -0.5 * dt * v_.diagonal();
      p.noalias() += x_.transpose() * db_;
      for (std::size_t a = 0; a < model_.jumps.size(); ++a) {
        const double rate = std::max(0.0, (v_ * model_.jumps[a].m).trace());
        p -= rate * dt * drift_jump_[a];
        const std::size_t count = poisson(rng, rate * dt);
        if (count > 0) {
          p += static_cast<double>(count) * model_.jumps[a].xi;
          for (std::size_t c = 0; c < count; ++c) rec_.jumps.push_back({grid_.time(j), a, rate});
        }
      }
    }
    f_(rec_, out);
  }

 private:
  static std::size_t poisson(PathRng& rng, double mean) {
    if (mean <= 0.0) return 0;
    // inversion; rates per step are small
    double u = rng.uniform();
    double pk = std::exp(-mean);
    double cdf = pk;
    std::size_t k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      pk *= mean / static_cast<double>(k);
      cdf += pk;
      if (pk == 0.0) break;
    }
    return k;
  }

  HestonModelSpec model_;
  TimeGrid grid_;
  std::size_t dim_;
  Functional f_;
  std::shared_ptr<const StepOperator> op_;
  double comp_ = 1.0;
  std::vector<Vector> drift_jump_;
  PricePathRecord rec_;
  Matrix g_, noise_, xi_, dw_, x_, v_;
  Vector db_;
};

template <class Functional>
HestonSimulator<Functional> make_heston_simulator(const HestonModelSpec& model, const TimeGrid& grid,
                                                  std::size_t dim, Functional f) {
  return HestonSimulator<Functional>(model, grid, dim, std::move(f));
}

inline std::vector<PricePathRecord> simulate_heston(const HestonModelSpec& model, const TimeGrid& grid,
                                                    std::size_t paths, std::uint64_t seed, unsigned workers = 1) {
  const Eigen::Index d = model.d();
  const std::size_t per = static_cast<std::size_t>(d + d * d);
  auto flatten = [per](const PricePathRecord& r, double* out) {
    for (std::size_t j = 0; j < r.P.size(); ++j) {
      double* o = out + j * per;
      const Eigen::Index d = r.P[j].size();
      for (Eigen::Index a = 0; a < d; ++a) o[a] = r.P[j](a);
      for (Eigen::Index a = 0; a < d * d; ++a) o[d + a] = r.V[j].data()[a];
    }
  };
  auto sim = make_heston_simulator(model, grid, per * grid.size(), flatten);
  const auto raw = collect_paths(sim, paths, seed, workers);
  std::vector<PricePathRecord> out;
  for (const auto& v : raw) {
    PricePathRecord r;
    r.grid = grid;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double* o = v.data() + j * per;
      r.P.push_back(Eigen::Map<const Vector>(o, d));
      r.V.push_back(Eigen::Map<const Matrix>(o + d, d, d));
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// E[exp(w^T P_t)] for a complex argument w (inside the exponential-moment strip).
inline Complex heston_transform(const HestonModelSpec& model, const CVector& w, double t) {
  model.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("heston transform: t must be >= 0");
  const Eigen::Index kd = static_cast<Eigen::Index>(model.nu().size()) * model.d();
  Complex lin = 0.0;
  for (Eigen::Index i = 0; i < model.d(); ++i) lin += w(i) * model.p0(i);
  if (t == 0.0) return std::exp(lin);
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t / 0.25)));
  const auto traj = solve_joint_riccati_heston(w, CMatrix::Zero(kd, kd), model.riccati_model(), TimeGrid::over(t, steps));
  const CMatrix g0 = model.gamma0.stacked().cast<Complex>();
  const Complex pair = (g0 * traj.M.back() * g0.transpose()).trace();
  return std::exp(-traj.phi.back() - pair + lin);
}

/// E[exp(i v^T P_t)].
inline Complex char_function(const HestonModelSpec& model, const Vector& v, double t) {
  return heston_transform(model, v.cast<Complex>() * Complex(0.0, 1.0), t);
}

struct FourierPrice {
  double strike = 0.0;
  double price = 0.0;
  double quadrature_error = 0.0;  // gap between two panel resolutions
  double truncation = 0.0;        // upper limit of the frequency integral
};

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
inline std::pair<Vector, Vector> gauss_legendre(int points) {
  Matrix j = Matrix::Zero(points, points);
  for (int i = 1; i < points; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    j(i, i - 1) = j(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(j);
  Vector w = 2.0 * es.eigenvectors().row(0).transpose().cwiseAbs2();
  return {es.eigenvalues(), w};
}

}  // namespace detail

/// Damped-transform (Carr-Madan) call prices on asset i, all strikes sharing
/// one set of transform evaluations. S_0 = exp(P_0,i), zero rates.
inline std::vector<FourierPrice> fourier_price_calls(const HestonModelSpec& model, Eigen::Index asset,
                                                     const std::vector<double>& strikes, double maturity,
                                                     double alpha = 1.5) {
  model.validate();
  if (asset < 0 || asset >= model.d()) throw std::invalid_argument("fourier price: asset index out of range");
  if (!(maturity > 0.0)) throw std::invalid_argument("fourier price: maturity must be > 0");
  for (double k : strikes)
    if (!(k > 0.0)) throw std::invalid_argument("fourier price: strike must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("fourier price: damping must be > 0");

  auto transform = [&](Complex z) {
    CVector w = CVector::Zero(model.d());
    w(asset) = z;
    return heston_transform(model, w, maturity);
  };
  // strip probe: the (alpha + 1)-th exponential moment must exist
  Complex probe;
  try {
    probe = transform(Complex(alpha + 1.0, 0.0));
  } catch (const RiccatiBlowUp& e) {
    throw std::runtime_error("fourier price: damping alpha = " + std::to_string(alpha) +
                             " lies outside the moment strip (" + e.what() + "); try a smaller alpha");
  }
  if (!std::isfinite(probe.real()) || probe.real() <= 0.0)
    throw std::runtime_error("fourier price: moment probe failed; try a smaller alpha");

  auto psi = [&](double u) {
    const Complex phi = transform(Complex(alpha + 1.0, u));
    const Complex den(alpha * alpha + alpha - u * u, (2.0 * alpha + 1.0) * u);
    return phi / den;
  };

  const double width = 2.0;
  const auto [x8, w8] = detail::gauss_legendre(8);
  const auto [x16, w16] = detail::gauss_legendre(16);
  std::vector<double> logk;
  for (double k : strikes) logk.push_back(std::log(k));
  std::vector<double> coarse(strikes.size(), 0.0), fine(strikes.size(), 0.0);
  double upper = 0.0;
  int quiet = 0;
  for (int panel = 0; panel < 2000 && quiet < 3; ++panel) {
    const double a = panel * width;
    double panel_max = 0.0;
    auto accumulate = [&](const Vector& x, const Vector& w, std::vector<double>& acc) {
      for (Eigen::Index q = 0; q < x.size(); ++q) {
        const double u = a + 0.5 * width * (x(q) + 1.0);
        const Complex p = psi(u);
        panel_max = std::max(panel_max, std::abs(p));
        for (std::size_t s = 0; s < strikes.size(); ++s)
          acc[s] += 0.5 * width * w(q) * (std::exp(Complex(0.0, -u * logk[s])) * p).real();
      }
    };
    accumulate(x8, w8, coarse);
    accumulate(x16, w16, fine);
    upper = a + width;
    quiet = panel_max < 1e-12 * std::abs(probe) ? quiet + 1 : 0;
  }
  std::vector<FourierPrice> out;
  for (std::size_t s = 0; s < strikes.size(); ++s) {
    const double scale = std::exp(-alpha * logk[s]) / M_PI;
    out.push_back({strikes[s], scale * fine[s], scale * std::abs(fine[s] - coarse[s]), upper});
  }
  return out;
}

inline FourierPrice fourier_price_call(const HestonModelSpec& model, Eigen::Index asset, double strike,
                                       double maturity, double alpha = 1.5) {
  return fourier_price_calls(model, asset, {strike}, maturity, alpha).front();
}

}  // namespace vlift
