#pragma once

// Transform exponents: the lift Riccati ODE and the matrix Riccati Volterra
// equation for the jump process, and the joint Riccati system of the
// Volterra Heston model.

#include "vlift/jump_lift.hpp"

namespace vlift {

/// u + sum_r (exp(Tr(u xi_r)) - 1) mu_r / min(||xi_r||, 1).
inline Matrix nonlinearity_R(const Matrix& u, const JumpMeasureSpec& spec) {
  Matrix out = u;
  for (std::size_t r = 0; r < spec.size(); ++r)
    out += std::expm1((u * spec.atoms[r]).trace()) / spec.truncated_norm(r) * spec.weights[r];
  return out;
}

/// Jump part only: R(u) - u.
inline Matrix jump_part_R(const Matrix& u, const JumpMeasureSpec& spec) {
  Matrix out = Matrix::Zero(u.rows(), u.cols());
  for (std::size_t r = 0; r < spec.size(); ++r)
    out += std::expm1((u * spec.atoms[r]).trace()) / spec.truncated_norm(r) * spec.weights[r];
  return out;
}

// ---------------------------------------------------------------------------
// Lift Riccati ODE

struct LiftRiccatiTrajectory {
  TimeGrid grid;
  std::vector<std::vector<Matrix>> y;  // y[m][i] = y_{t_m}(x_i)

  /// sum_i Tr(y_{t_m}(x_i) lambda0_i)
  double pairing(std::size_t m, const std::vector<Matrix>& lambda0) const {
    double s = 0.0;
    for (std::size_t i = 0; i < lambda0.size(); ++i) s += (y[m][i] * lambda0[i]).trace();
    return s;
  }
};

namespace detail {

struct LiftRiccatiRhs {
  const AtomicMatrixMeasure& nu;
  const JumpMeasureSpec& spec;

  void operator()(const std::vector<Matrix>& y, std::vector<Matrix>& dy) const {
    const Eigen::Index d = nu.rows();
    Matrix psi = Matrix::Zero(d, d);
    Matrix psi_eps = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < nu.size(); ++i) {
      const Matrix p = y[i] * nu.weight(i) + nu.weight(i) * y[i];
      psi += p;
      psi_eps += std::exp(-nu.node(i) * spec.epsilon_shift) * p;
    }
    const Matrix common = psi + jump_part_R(psi_eps, spec);
    dy.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] = -nu.node(i) * y[i] + common;
  }
};

inline void axpy(std::vector<Matrix>& out, const std::vector<Matrix>& a, double h, const std::vector<Matrix>& b) {
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + h * b[i];
}

}  // namespace detail

/// Fixed-step RK4 on the grid: y_i' = -x_i y_i + R(sum_j (y_j nu_j + nu_j y_j)).
/// With an epsilon shift the jump part sees exp(-x_i eps)-weighted pairings.
inline LiftRiccatiTrajectory solve_lift_riccati_jump(const std::vector<Matrix>& y0, const AtomicMatrixMeasure& nu,
                                                     const JumpMeasureSpec& spec, const TimeGrid& grid) {
  if (y0.size() != nu.size()) throw std::invalid_argument("lift riccati: one y0 per node required");
  spec.validate(nu.rows());
  const double dt = grid.dt();
  if (nu.max_node() * dt > 0.1)
    throw std::invalid_argument("lift riccati: step " + std::to_string(dt) + " exceeds 0.1 / max node " +
                                std::to_string(nu.max_node()));
  detail::LiftRiccatiRhs f{nu, spec};
  LiftRiccatiTrajectory out{grid, {}};
  out.y.reserve(grid.size());
  out.y.push_back(y0);
  std::vector<Matrix> y = y0, k1, k2, k3, k4, tmp;
  for (std::size_t m = 1; m < grid.size(); ++m) {
    f(y, k1);
    detail::axpy(tmp, y, 0.5 * dt, k1);
    f(tmp, k2);
    detail::axpy(tmp, y, 0.5 * dt, k2);
    f(tmp, k3);
    detail::axpy(tmp, y, dt, k3);
    f(tmp, k4);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = symmetrize(y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
      if (!y[i].allFinite())
        throw std::runtime_error("lift riccati: non-finite value at t = " + std::to_string(grid.time(m)));
    }
    out.y.push_back(y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Riccati Volterra equation
//   Psi_t = u K(t) + K(t) u + int_0^t (R(Psi_s) K(t-s) + K(t-s) R(Psi_s)) ds

struct RiccatiVolterraState {
  TimeGrid grid;
  Matrix u;
  MatrixSeries psi;
  std::size_t iterations = 0;  // Picard sweeps, 0 for time-marching
};

enum class VolterraMethod { TimeMarching, Picard };

class RiccatiConvergenceError : public std::runtime_error {
 public:
  RiccatiConvergenceError(std::size_t iterations, double residual)
      : std::runtime_error("riccati volterra: no convergence after " + std::to_string(iterations) +
                           " sweeps, last change " + std::to_string(residual)),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

namespace detail {

inline Matrix volterra_rhs(std::size_t m, const Matrix& u, const MatrixSeries& k, const FlatSeries& kk,
                           const FlatSeries& r, double dt, std::vector<double>& acc) {
  const Eigen::Index d = u.rows();
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) gemm_both(acc.data(), r.at(j), kk.at(m - j), d, dt);
  return u * k[m] + k[m] * u + Eigen::Map<const Matrix>(acc.data(), d, d);
}

}  // namespace detail

/// Left-point discretization of the convolution. Time-marching is explicit;
/// Picard sweeps the same discrete equation until the sup change is below 1e-10.
inline RiccatiVolterraState solve_volterra_riccati_jump(const Matrix& u, const AtomicMatrixMeasure& nu,
                                                        const JumpMeasureSpec& spec, const TimeGrid& grid,
                                                        VolterraMethod method = VolterraMethod::TimeMarching,
                                                        std::size_t max_iterations = 500) {
  if (u.rows() != nu.rows() || u.cols() != nu.rows()) throw std::invalid_argument("riccati volterra: u must be d x d");
  if (spec.epsilon_shift != 0.0)
    throw std::invalid_argument("riccati volterra: the Volterra form requires a zero epsilon shift");
  spec.validate(nu.rows());
  const Eigen::Index d = u.rows();
  const MatrixSeries k = sample_kernel(nu, grid);
  const detail::FlatSeries kk(k);
  const double dt = grid.dt();
  RiccatiVolterraState st{grid, u, MatrixSeries(grid.size(), Matrix::Zero(d, d)), 0};
  detail::FlatSeries r(d, d, grid.size());
  std::vector<double> acc(static_cast<std::size_t>(d * d));
  auto store_r = [&](std::size_t m) { Eigen::Map<Matrix>(r.at(m), d, d) = nonlinearity_R(st.psi[m], spec); };
  if (method == VolterraMethod::TimeMarching) {
    for (std::size_t m = 0; m < grid.size(); ++m) {
      st.psi[m] = detail::volterra_rhs(m, u, k, kk, r, dt, acc);
      if (!st.psi[m].allFinite())
        throw std::runtime_error("riccati volterra: non-finite value at grid index " + std::to_string(m));
      store_r(m);
    }
    return st;
  }
  double change = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    for (std::size_t m = 0; m < grid.size(); ++m) store_r(m);
    change = 0.0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
      Matrix next = detail::volterra_rhs(m, u, k, kk, r, dt, acc);
      change = std::max(change, max_abs(next - st.psi[m]));
      st.psi[m] = std::move(next);
    }
    if (!std::isfinite(change)) break;
    if (change < 1e-10) {
      st.iterations = it;
      return st;
    }
  }
  throw RiccatiConvergenceError(max_iterations, change);
}

struct LaplaceReport {
  double volterra = 0.0;
  double lift = 0.0;
  double discrepancy = 0.0;  // relative
};

/// E[exp(Tr(u V_t))] from the Volterra form (trapezoid for the outer integral)
/// and from the lift ODE, on `steps` uniform steps of [0, t].
inline LaplaceReport laplace_transform_jump(const Matrix& u, const std::vector<Matrix>& lambda0,
                                            const AtomicMatrixMeasure& nu, const JumpMeasureSpec& spec, double t,
                                            std::size_t steps, VolterraMethod method = VolterraMethod::TimeMarching) {
  if (!(t >= 0.0)) throw std::invalid_argument("laplace transform: t must be >= 0");
  if (lambda0.size() != nu.size()) throw std::invalid_argument("laplace transform: one lambda0 per node required");
  LaplaceReport rep;
  auto h = [&](double s) {
    Matrix out = Matrix::Zero(nu.rows(), nu.rows());
    for (std::size_t i = 0; i < nu.size(); ++i) out += std::exp(-nu.node(i) * s) * lambda0[i];
    return out;
  };
  if (t == 0.0) {
    rep.volterra = rep.lift = std::exp((u * h(0.0)).trace());
    return rep;
  }
  const TimeGrid grid = TimeGrid::over(t, steps);
  const auto st = solve_volterra_riccati_jump(u, nu, spec, grid, method);
  double integral = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double wgt = (m == 0 || m + 1 == grid.size()) ? 0.5 : 1.0;
    integral += wgt * (nonlinearity_R(st.psi[m], spec) * h(t - grid.time(m))).trace();
  }
  rep.volterra = std::exp((u * h(t)).trace() + grid.dt() * integral);

  const double lift_dt_max = nu.max_node() > 0.0 ? 0.1 / nu.max_node() : grid.dt();
  const auto lift_steps = std::max<std::size_t>(steps, static_cast<std::size_t>(std::ceil(t / lift_dt_max)));
  const auto traj = solve_lift_riccati_jump(std::vector<Matrix>(nu.size(), u), nu, spec, TimeGrid::over(t, lift_steps));
  rep.lift = std::exp(traj.pairing(lift_steps, lambda0));
  rep.discrepancy = std::abs(rep.volterra - rep.lift) / std::abs(rep.lift);
  return rep;
}

// ---------------------------------------------------------------------------
// Joint Riccati system of the Volterra Heston model.
//
// With G = [gamma_1 ... gamma_k] (n x kd), E = [I; ...; I] (kd x d),
// D = diag(x_i I_d), N = [nu_1 ... nu_k] (d x kd) and a complex argument w,
//   E[exp(-Tr(G_T M_0 G_T^T) + w^T P_T)] = exp(-phi_T - Tr(G_0 M_T G_0^T) + w^T P_0)
// where
//   M' = -(DM + MD) - 2 M N^T N M + M a w^T E^T + E w a^T M
//        + E (diag(w)/2 - w w^T/2 - sum_a J_a m_a) E^T,     a = N^T rho,
//   phi' = n Tr(N M N^T),
//   J_a = exp(w^T xi_a) - 1 - w^T (exp(xi_a) - 1).
// The node-pair block (i, j) of M is psi(x_i, x_j).

struct PriceJump {
  Vector xi;  // log-price jump, R^d
  Matrix m;   // PSD weight, rate Tr(V m)
};

struct JointRiccatiModel {
  std::shared_ptr<const AtomicMatrixMeasure> nu;
  Eigen::Index n = 1;
  Vector rho;
  std::vector<PriceJump> jumps;
};

struct JointRiccatiTrajectory {
  TimeGrid grid;
  std::vector<CMatrix> M;
  std::vector<Complex> phi;

  CMatrix psi(std::size_t m, std::size_t i, std::size_t j, Eigen::Index d) const {
    return M[m].block(static_cast<Eigen::Index>(i) * d, static_cast<Eigen::Index>(j) * d, d, d);
  }
};

class RiccatiBlowUp : public std::runtime_error {
 public:
  explicit RiccatiBlowUp(double t)
      : std::runtime_error("joint riccati: solution exceeded 1e8 at t = " + std::to_string(t)), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

class JointRiccatiSystem {
 public:
  JointRiccatiSystem(const JointRiccatiModel& model, const CVector& w) : n_(model.n) {
    const auto& nu = *model.nu;
    d_ = nu.rows();
    const Eigen::Index k = static_cast<Eigen::Index>(nu.size());
    const Eigen::Index kd = k * d_;
    if (w.size() != d_) throw std::invalid_argument("joint riccati: argument must have length d");
    if (model.rho.size() != d_) throw std::invalid_argument("joint riccati: rho must have length d");
    diag_.resize(kd);
    Matrix nmat(d_, kd);
    e_ = CMatrix::Zero(kd, d_);
    for (Eigen::Index i = 0; i < k; ++i) {
      diag_.segment(i * d_, d_).setConstant(nu.node(static_cast<std::size_t>(i)));
      nmat.middleCols(i * d_, d_) = nu.weight(static_cast<std::size_t>(i));
      e_.middleRows(i * d_, d_) = CMatrix::Identity(d_, d_);
    }
    n_mat_ = nmat.cast<Complex>();
    ntn_ = (nmat.transpose() * nmat).cast<Complex>();
    const CVector a = (nmat.transpose() * model.rho).cast<Complex>();
    coupling_ = a * w.transpose() * e_.transpose();  // M coupling_ + coupling_^T M
    CMatrix c = CMatrix::Zero(d_, d_);
    for (Eigen::Index i = 0; i < d_; ++i) c(i, i) += 0.5 * w(i);
    c -= 0.5 * w * w.transpose();
    for (const auto& jmp : model.jumps) {
      Complex lin = 0.0, wtx = 0.0;
      for (Eigen::Index i = 0; i < d_; ++i) {
        lin += w(i) * std::expm1(jmp.xi(i));
        wtx += w(i) * jmp.xi(i);
      }
      const Complex ja = std::exp(wtx) - 1.0 - lin;
      c -= ja * jmp.m.cast<Complex>();
    }
    c0_ = e_ * c * e_.transpose();
  }

  Eigen::Index size() const { return diag_.size(); }

  void rhs(const CMatrix& m, CMatrix& dm, Complex& dphi) const {
    dm = -(diag_.asDiagonal() * m + m * diag_.asDiagonal());
    dm.noalias() -= 2.0 * (m * ntn_ * m);
    dm.noalias() += m * coupling_;
    dm.noalias() += coupling_.transpose() * m;
    dm += c0_;
    dphi = static_cast<double>(n_) * (n_mat_ * m * n_mat_.transpose()).trace();
  }

  void rk4(CMatrix& m, Complex& phi, double h) const {
    CMatrix k1, k2, k3, k4;
    Complex p1, p2, p3, p4;
    rhs(m, k1, p1);
    rhs(m + 0.5 * h * k1, k2, p2);
    rhs(m + 0.5 * h * k2, k3, p3);
    rhs(m + h * k3, k4, p4);
    m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    phi += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
  }

 private:
  Eigen::Index n_ = 1;
  Eigen::Index d_ = 0;
  Vector diag_;
  CMatrix e_, n_mat_, ntn_, coupling_, c0_;
};

/// Adaptive RK4 (step doubling, local tolerance 1e-11 relative) between grid points.
inline JointRiccatiTrajectory solve_joint_riccati_heston(const CVector& w, const CMatrix& m0,
                                                         const JointRiccatiModel& model, const TimeGrid& grid) {
  const JointRiccatiSystem sys(model, w);
  if (m0.rows() != sys.size() || m0.cols() != sys.size())
    throw std::invalid_argument("joint riccati: initial matrix must be kd x kd");
  JointRiccatiTrajectory out{grid, {m0}, {Complex(0.0)}};
  CMatrix m = m0;
  Complex phi = 0.0;
  double h = std::min(grid.dt(), 1e-2);
  const double fastest = model.nu->max_node();
  if (fastest > 0.0) h = std::min(h, 0.1 / fastest);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    double t = grid.time(j - 1);
    const double end = grid.time(j);
    while (t < end) {
      const double step = std::min(h, end - t);
      CMatrix big = m, small = m;
      Complex pbig = phi, psmall = phi;
      sys.rk4(big, pbig, step);
      sys.rk4(small, psmall, 0.5 * step);
      sys.rk4(small, psmall, 0.5 * step);
      const double scale = 1.0 + small.cwiseAbs().maxCoeff() + std::abs(psmall);
      const double err = std::max((big - small).cwiseAbs().maxCoeff(), std::abs(pbig - psmall));
      if (!std::isfinite(err) || err > 1e-11 * scale) {
        if (!(step > 1e-12)) throw RiccatiBlowUp(t);
        h = 0.5 * step;
        continue;
      }
      // Richardson extrapolation of the two estimates
      m = small + (small - big) / 15.0;
      phi = psmall + (psmall - pbig) / 15.0;
      t += step;
      if (m.cwiseAbs().maxCoeff() > 1e8 || std::abs(phi) > 1e8) throw RiccatiBlowUp(t);
      if (err < 1e-13 * scale && step >= h) h = std::min(2.0 * h, fastest > 0.0 ? 0.1 / fastest : 0.1);
    }
    out.M.push_back(0.5 * (m + m.transpose()));
    out.phi.push_back(phi);
  }
  return out;
}

}  // namespace vlift
