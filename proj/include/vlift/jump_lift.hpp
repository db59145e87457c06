#pragma once

// Positive semidefinite pure-jump lift on finitely many nodes:
//   d lambda_i = (-x_i lambda_i + nu_i V + V nu_i) dt + jumps,   V = sum_i lambda_i,
// a jump of size xi adding exp(-x_i eps) (nu_i xi + xi nu_i) at every node.

#include "vlift/kernel_measure.hpp"
#include "vlift/mc_engine.hpp"

#include <memory>

namespace vlift {

struct JumpMeasureSpec {
  std::vector<Matrix> atoms;    // jump sizes, PSD
  std::vector<Matrix> weights;  // compensator weights, PSD
  double epsilon_shift = 0.0;

  std::size_t size() const { return atoms.size(); }

  void validate(Eigen::Index d, double eps_psd = 1e-12) const {
    if (atoms.size() != weights.size())
      throw std::invalid_argument("jump spec: atom count and weight count differ");
    if (!(epsilon_shift >= 0.0) || !std::isfinite(epsilon_shift))
      throw std::invalid_argument("jump spec: epsilon shift must be finite and >= 0");
    for (std::size_t r = 0; r < atoms.size(); ++r) {
      for (const Matrix* m : {&atoms[r], &weights[r]}) {
        if (m->rows() != d || m->cols() != d) throw std::invalid_argument("jump spec: atoms must be d x d");
        if (max_asymmetry(*m) > 1e-12 * std::max(1.0, max_abs(*m)))
          throw std::invalid_argument("jump spec: atom " + std::to_string(r) + " is not symmetric");
        if (!is_psd(*m, eps_psd)) throw std::invalid_argument("jump spec: atom " + std::to_string(r) + " is not PSD");
      }
    }
  }

  /// min(||xi_r||, 1) with the Frobenius norm.
  double truncated_norm(std::size_t r) const { return std::min(frobenius(atoms[r]), 1.0); }
};

/// Multivariate Hawkes: atoms e_ii with weights e_ii, so atom i fires at rate V_ii.
inline JumpMeasureSpec hawkes_jump_spec(Eigen::Index d, double epsilon_shift = 0.0) {
  JumpMeasureSpec s;
  for (Eigen::Index i = 0; i < d; ++i) {
    Matrix e = Matrix::Zero(d, d);
    e(i, i) = 1.0;
    s.atoms.push_back(e);
    s.weights.push_back(e);
  }
  s.epsilon_shift = epsilon_shift;
  return s;
}

inline void require_hawkes_inputs(const AtomicMatrixMeasure& nu, const std::vector<Matrix>& lambda0) {
  if (!nu.all_diagonal()) throw std::invalid_argument("hawkes preset: kernel weights must be diagonal");
  nu.require_psd();
  for (const auto& l : lambda0) {
    if (max_abs(Matrix(l) - Matrix(l.diagonal().asDiagonal())) > 0.0)
      throw std::invalid_argument("hawkes preset: initial weights must be diagonal");
    if (l.minCoeff() < 0.0) throw std::invalid_argument("hawkes preset: initial weights must be >= 0");
  }
}

/// Per-atom rates Tr(V mu_r) / min(||xi_r||, 1), clipped at 0.
inline Vector intensity(const Matrix& v, const JumpMeasureSpec& spec) {
  Vector r(static_cast<Eigen::Index>(spec.size()));
  for (std::size_t j = 0; j < spec.size(); ++j)
    r(static_cast<Eigen::Index>(j)) = std::max(0.0, (v * spec.weights[j]).trace() / spec.truncated_norm(j));
  return r;
}

class JumpLiftState {
 public:
  JumpLiftState() = default;

  JumpLiftState(std::shared_ptr<const AtomicMatrixMeasure> nu, std::vector<Matrix> lambda, std::size_t atoms = 0)
      : nu_(std::move(nu)), lam_(std::move(lambda)), counts_(atoms, 0) {
    if (!nu_) throw std::invalid_argument("jump state: missing measure");
    if (nu_->shape() != WeightShape::SymmetricD)
      throw std::invalid_argument("jump state: kernel weights must be symmetric d x d");
    if (lam_.size() != nu_->size()) throw std::invalid_argument("jump state: one lambda per node required");
    const Eigen::Index d = nu_->rows();
    for (const auto& l : lam_) {
      if (l.rows() != d || l.cols() != d) throw std::invalid_argument("jump state: lambda must be d x d");
      if (max_asymmetry(l) > 1e-12 * std::max(1.0, max_abs(l)))
        throw std::invalid_argument("jump state: lambda must be symmetric");
    }
    x_ = Matrix::Zero(d, d);
  }

  double t = 0.0;

  const AtomicMatrixMeasure& measure() const { return *nu_; }
  const std::shared_ptr<const AtomicMatrixMeasure>& measure_ptr() const { return nu_; }
  Eigen::Index d() const { return nu_->rows(); }
  std::size_t k() const { return nu_->size(); }
  const std::vector<Matrix>& lambda() const { return lam_; }
  std::vector<Matrix>& lambda() { return lam_; }
  const Matrix& x_accum() const { return x_; }
  Matrix& x_accum() { return x_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::vector<std::size_t>& counts() { return counts_; }

  Matrix V() const {
    Matrix v = Matrix::Zero(d(), d());
    for (const auto& l : lam_) v += l;
    return v;
  }

 private:
  std::shared_ptr<const AtomicMatrixMeasure> nu_;
  std::vector<Matrix> lam_;
  Matrix x_;
  std::vector<std::size_t> counts_;
};

/// Classical RK4 for the linear drift, on the flat state
/// [vec lambda_1, ..., vec lambda_k, vec int V] (column-major d x d blocks).
/// Steps are subdivided to at most 0.02 / L with L = max x + 2 sum ||nu_i||,
/// which also keeps them below 0.1 / max x. Holds scratch buffers, so use one
/// instance per thread.
class DriftFlow {
 public:
  DriftFlow() = default;

  explicit DriftFlow(const AtomicMatrixMeasure& nu) : d_(nu.rows()), k_(nu.size()) {
    if (nu.shape() != WeightShape::SymmetricD) throw std::invalid_argument("drift flow: weights must be d x d");
    const Eigen::Index dd = d_ * d_;
    const Eigen::Index kk = static_cast<Eigen::Index>(k_);
    a_ = Matrix::Zero((kk + 1) * dd, (kk + 1) * dd);
    const Matrix id = Matrix::Identity(d_, d_);
    double lip = 0.0;
    for (Eigen::Index i = 0; i < kk; ++i) {
      const Matrix& w = nu.weight(static_cast<std::size_t>(i));
      // vec(w L) = (I kron w) vec L, vec(L w) = (w^T kron I) vec L
      const Matrix coupling = kron(id, w) + kron(w.transpose(), id);
      for (Eigen::Index j = 0; j < kk; ++j) a_.block(i * dd, j * dd, dd, dd) += coupling;
      a_.block(i * dd, i * dd, dd, dd) -= nu.node(static_cast<std::size_t>(i)) * Matrix::Identity(dd, dd);
      a_.block(kk * dd, i * dd, dd, dd) = Matrix::Identity(dd, dd);
      lip += 2.0 * frobenius(w);
    }
    lip += nu.max_node();
    h_max_ = lip > 0.0 ? 0.02 / lip : std::numeric_limits<double>::infinity();
    k1_.resize(a_.rows());
    k2_.resize(a_.rows());
    k3_.resize(a_.rows());
    k4_.resize(a_.rows());
    tmp_.resize(a_.rows());
  }

  Eigen::Index d() const { return d_; }
  std::size_t k() const { return k_; }
  Eigen::Index state_size() const { return a_.rows(); }
  double max_substep() const { return h_max_; }
  const Matrix& generator() const { return a_; }

  /// Number of RK4 substeps used to cover a step of length h.
  std::size_t substeps(double h) const {
    if (!(h > 0.0)) return 0;
    if (!std::isfinite(h_max_)) return 1;
    return static_cast<std::size_t>(std::ceil(h / h_max_ * (1.0 - 1e-12)));
  }

  void rk4(Vector& s, double h) const {
    k1_.noalias() = a_ * s;
    tmp_ = s + 0.5 * h * k1_;
    k2_.noalias() = a_ * tmp_;
    tmp_ = s + 0.5 * h * k2_;
    k3_.noalias() = a_ * tmp_;
    tmp_ = s + h * k3_;
    k4_.noalias() = a_ * tmp_;
    s += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

  void flow(Vector& s, double h) const {
    if (h < 0.0) throw std::invalid_argument("drift flow: negative step");
    const std::size_t m = substeps(h);
    for (std::size_t i = 0; i < m; ++i) rk4(s, h / static_cast<double>(m));
    symmetrize_blocks(s);
    if (!s.allFinite()) throw std::runtime_error("drift flow: non-finite state");
  }

  void symmetrize_blocks(Vector& s) const {
    const Eigen::Index dd = d_ * d_;
    for (Eigen::Index b = 0; b < s.size(); b += dd) {
      Eigen::Map<Matrix> m(s.data() + b, d_, d_);
      for (Eigen::Index p = 0; p < d_; ++p)
        for (Eigen::Index q = p + 1; q < d_; ++q) m(p, q) = m(q, p) = 0.5 * (m(p, q) + m(q, p));
    }
  }

  Matrix block(const Vector& s, std::size_t i) const {
    return Eigen::Map<const Matrix>(s.data() + static_cast<Eigen::Index>(i) * d_ * d_, d_, d_);
  }

  Matrix v(const Vector& s) const {
    Matrix out = Matrix::Zero(d_, d_);
    for (std::size_t i = 0; i < k_; ++i) out += block(s, i);
    return out;
  }

  Matrix integral(const Vector& s) const { return block(s, k_); }

  Vector pack(const std::vector<Matrix>& lambda, const Matrix& integral) const {
    Vector s(state_size());
    const Eigen::Index dd = d_ * d_;
    for (std::size_t i = 0; i < k_; ++i)
      Eigen::Map<Matrix>(s.data() + static_cast<Eigen::Index>(i) * dd, d_, d_) = lambda[i];
    Eigen::Map<Matrix>(s.data() + static_cast<Eigen::Index>(k_) * dd, d_, d_) = integral;
    return s;
  }

  static Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  }

 private:
  Eigen::Index d_ = 0;
  std::size_t k_ = 0;
  Matrix a_;
  double h_max_ = 0.0;
  mutable Vector k1_, k2_, k3_, k4_, tmp_;
};

/// Deterministic flow of the lift over dt; X accumulates int V.
inline JumpLiftState drift_flow_step(const JumpLiftState& state, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("drift_flow_step: dt must be > 0");
  DriftFlow flow(state.measure());
  Vector s = flow.pack(state.lambda(), Matrix::Zero(state.d(), state.d()));
  flow.flow(s, dt);
  JumpLiftState out(state);
  for (std::size_t i = 0; i < state.k(); ++i) out.lambda()[i] = flow.block(s, i);
  out.x_accum() += flow.integral(s);
  out.t = state.t + dt;
  return out;
}

struct JumpEvent {
  double t = 0.0;
  std::size_t atom = 0;
  double intensity = 0.0;  // rate of the firing atom just before the jump
};

/// One simulated path recorded on the control grid.
struct JumpPath {
  TimeGrid grid;
  std::vector<Matrix> V;              // at grid points
  std::vector<Matrix> X;              // at grid points
  std::vector<Matrix> drift_integral; // int V over each grid interval
  std::vector<std::vector<std::size_t>> counts;  // at grid points
  std::vector<JumpEvent> jumps;
  double min_eigenvalue_v = 0.0;      // monitored over grid points
  std::size_t bisections = 0;
};

/// Ogata thinning with a dominating rate per control interval. The bound is
/// 1.5 times the largest total rate seen at the flow's substeps over the
/// remaining interval; if a candidate still exceeds it the interval is halved.
class JumpPathSimulator {
 public:
  JumpPathSimulator(const JumpLiftState& state0, JumpMeasureSpec spec, double horizon, double thinning_dt)
      : state0_(state0), spec_(std::move(spec)), flow_(state0.measure()) {
    spec_.validate(state0.d());
    if (!(thinning_dt > 0.0)) throw std::invalid_argument("jump path: thinning_dt must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("jump path: horizon must be > 0");
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / thinning_dt - 1e-9));
    grid_ = TimeGrid::over(horizon, std::max<std::size_t>(steps, 1));
    const auto k = state0.k();
    for (std::size_t r = 0; r < spec_.size(); ++r) {
      std::vector<Matrix> imp;
      for (std::size_t i = 0; i < k; ++i) {
        const Matrix& w = state0.measure().weight(i);
        imp.push_back(std::exp(-state0.measure().node(i) * spec_.epsilon_shift) *
                      (w * spec_.atoms[r] + spec_.atoms[r] * w));
      }
      Vector packed = flow_.pack(imp, Matrix::Zero(state0.d(), state0.d()));
      impact_.push_back(packed);
      rate_coef_.push_back(Vector(Eigen::Map<const Vector>(spec_.weights[r].data(), spec_.weights[r].size())) /
                           spec_.truncated_norm(r));
    }
  }

  const TimeGrid& grid() const { return grid_; }
  const JumpMeasureSpec& spec() const { return spec_; }
  const DriftFlow& flow() const { return flow_; }

  void run(PathRng& rng, JumpPath& path) {
    const Eigen::Index d = state0_.d();
    const std::size_t m = spec_.size();
    path.grid = grid_;
    path.V.assign(1, state0_.V());
    path.X.assign(1, state0_.x_accum());
    path.drift_integral.clear();
    path.counts.assign(1, state0_.counts().empty() ? std::vector<std::size_t>(m, 0) : state0_.counts());
    path.jumps.clear();
    path.bisections = 0;
    path.min_eigenvalue_v = min_eigenvalue(path.V[0]);

    s_ = flow_.pack(state0_.lambda(), Matrix::Zero(d, d));
    Matrix x = state0_.x_accum();
    std::vector<std::size_t> counts = path.counts[0];
    rates_.resize(static_cast<Eigen::Index>(m));

    for (std::size_t j = 1; j < grid_.size(); ++j) {
      const double b = grid_.time(j);
      double t = grid_.time(j - 1);
      double e = b;
      Matrix jumps_in_interval = Matrix::Zero(d, d);
      double bound = m == 0 ? 0.0 : dominating_rate(t, e);
      while (t < b) {
        if (bound <= 0.0) {
          flow_.flow(s_, e - t);
          t = e;
          if (e < b) {
            e = b;
            bound = dominating_rate(t, e);
          }
          continue;
        }
        const double tau = t + rng.exponential() / bound;
        if (tau >= e) {
          flow_.flow(s_, e - t);
          t = e;
          if (e < b) {
            e = b;
            bound = dominating_rate(t, e);
          }
          continue;
        }
        cand_ = s_;
        flow_.flow(cand_, tau - t);
        const double total = rates(cand_);
        if (total > bound) {
          // bound violated: discard the candidate and retry on half the interval
          ++path.bisections;
          e = t + 0.5 * (e - t);
          bound = dominating_rate(t, e);
          continue;
        }
        s_.swap(cand_);
        t = tau;
        if (rng.uniform() * bound <= total) {
          double pick = rng.uniform() * total;
          std::size_t r = 0;
          while (r + 1 < m && pick >= rates_(static_cast<Eigen::Index>(r))) {
            pick -= rates_(static_cast<Eigen::Index>(r));
            ++r;
          }
          path.jumps.push_back({tau, r, rates_(static_cast<Eigen::Index>(r))});
          s_ += impact_[r];
          jumps_in_interval += spec_.atoms[r];
          ++counts[r];
          bound = dominating_rate(t, e);
        }
      }
      const Matrix integral = flow_.integral(s_);
      s_.tail(d * d).setZero();
      x += integral + jumps_in_interval;
      path.drift_integral.push_back(integral);
      path.V.push_back(flow_.v(s_));
      path.X.push_back(x);
      path.counts.push_back(counts);
      path.min_eigenvalue_v = std::min(path.min_eigenvalue_v, min_eigenvalue(path.V.back()));
    }
  }

  /// Lift state at the end of the last run (the horizon).
  JumpLiftState final_state(const JumpPath& path) const {
    JumpLiftState out(state0_);
    for (std::size_t i = 0; i < state0_.k(); ++i) out.lambda()[i] = flow_.block(s_, i);
    out.x_accum() = path.X.back();
    out.counts() = path.counts.back();
    out.t = grid_.horizon();
    return out;
  }

 private:
  double rates(const Vector& s) {
    const Matrix v = flow_.v(s);
    double total = 0.0;
    for (std::size_t r = 0; r < rate_coef_.size(); ++r) {
      const double q = std::max(0.0, Eigen::Map<const Vector>(v.data(), v.size()).dot(rate_coef_[r]));
      rates_(static_cast<Eigen::Index>(r)) = q;
      total += q;
    }
    return total;
  }

  double dominating_rate(double t, double e) {
    bound_state_ = s_;
    double worst = rates(bound_state_);
    const std::size_t steps = flow_.substeps(e - t);
    for (std::size_t i = 0; i < steps; ++i) {
      flow_.rk4(bound_state_, (e - t) / static_cast<double>(steps));
      worst = std::max(worst, rates(bound_state_));
    }
    return 1.5 * worst;
  }

  JumpLiftState state0_;
  JumpMeasureSpec spec_;
  DriftFlow flow_;
  TimeGrid grid_;
  std::vector<Vector> impact_;
  std::vector<Vector> rate_coef_;
  Vector s_, cand_, bound_state_, rates_;
};

inline JumpPath simulate_jump_path(const JumpLiftState& state0, const JumpMeasureSpec& spec, double horizon,
                                   PathRng& rng, double thinning_dt) {
  JumpPathSimulator sim(state0, spec, horizon, thinning_dt);
  JumpPath path;
  sim.run(rng, path);
  return path;
}

/// Aggregates a recorded path onto a grid `factor` times coarser.
inline JumpPath coarsen(const JumpPath& path, std::size_t factor) {
  if (factor == 0 || path.grid.steps() % factor != 0)
    throw std::invalid_argument("coarsen: factor must divide the step count");
  JumpPath out;
  out.grid = TimeGrid(path.grid.dt() * static_cast<double>(factor), path.grid.steps() / factor);
  out.jumps = path.jumps;
  out.min_eigenvalue_v = path.min_eigenvalue_v;
  for (std::size_t j = 0; j <= out.grid.steps(); ++j) {
    out.V.push_back(path.V[j * factor]);
    out.X.push_back(path.X[j * factor]);
    out.counts.push_back(path.counts[j * factor]);
    if (j > 0) {
      Matrix acc = Matrix::Zero(path.V[0].rows(), path.V[0].cols());
      for (std::size_t q = (j - 1) * factor; q < j * factor; ++q) acc += path.drift_integral[q];
      out.drift_integral.push_back(acc);
    }
  }
  return out;
}

/// V reconstructed as h(t) + int K(t-s) dX_s + int dX_s K(t-s): midpoint sums
/// over the absolutely continuous part, exact sums over the jumps.
inline std::vector<Matrix> volterra_projection(const JumpPath& path, const AtomicMatrixMeasure& nu,
                                               const std::vector<Matrix>& lambda0, const JumpMeasureSpec& spec) {
  if (path.V.size() != path.grid.size() || path.drift_integral.size() != path.grid.steps())
    throw std::invalid_argument("volterra_projection: path does not match its grid");
  if (lambda0.size() != nu.size()) throw std::invalid_argument("volterra_projection: lambda0 size mismatch");
  const double dt = path.grid.dt();
  std::vector<Matrix> out;
  for (std::size_t m = 0; m < path.grid.size(); ++m) {
    const double tm = path.grid.time(m);
    Matrix v = Matrix::Zero(nu.rows(), nu.cols());
    for (std::size_t i = 0; i < nu.size(); ++i) v += std::exp(-nu.node(i) * tm) * lambda0[i];
    for (std::size_t j = 0; j < m; ++j) {
      const Matrix k = eval_kernel(nu, tm - (static_cast<double>(j) + 0.5) * dt);
      v += k * path.drift_integral[j] + path.drift_integral[j] * k;
    }
    for (const auto& ev : path.jumps) {
      if (ev.t > tm) break;
      const Matrix k = eval_kernel(nu, tm - ev.t + spec.epsilon_shift);
      v += k * spec.atoms[ev.atom] + spec.atoms[ev.atom] * k;
    }
    out.push_back(symmetrize(v));
  }
  return out;
}

}  // namespace vlift
