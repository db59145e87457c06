#pragma once

// Matrix Ornstein-Uhlenbeck lift on finitely many nodes:
//   d gamma_i = -x_i gamma_i dt + dW nu_i,   W an n x d Brownian matrix.
// Steps are sampled exactly from the Gaussian transition law.

#include "vlift/kernel_measure.hpp"
#include "vlift/mc_engine.hpp"

#include <memory>

namespace vlift {

/// gamma_i stored side by side as an n x (k d) matrix.
class OULiftState {
 public:
  OULiftState() = default;

  OULiftState(std::shared_ptr<const AtomicMatrixMeasure> measure, const std::vector<Matrix>& gamma,
              double t = 0.0)
      : t_(t), measure_(std::move(measure)) {
    if (!measure_) throw std::invalid_argument("OU state: missing measure");
    if (measure_->shape() != WeightShape::SymmetricD)
      throw std::invalid_argument("OU state: driving measure must have symmetric d x d weights");
    const auto k = static_cast<Eigen::Index>(measure_->size());
    const Eigen::Index d = measure_->rows();
    if (gamma.size() != measure_->size())
      throw std::invalid_argument("OU state: one gamma matrix per node required");
    const Eigen::Index n = gamma.front().rows();
    g_.resize(n, k * d);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (gamma[i].rows() != n || gamma[i].cols() != d)
        throw std::invalid_argument("OU state: gamma matrices must be n x d");
      g_.middleCols(i * d, d) = gamma[i];
    }
    if (!g_.allFinite()) throw std::invalid_argument("OU state: non-finite entries");
  }

  static OULiftState zero(std::shared_ptr<const AtomicMatrixMeasure> measure, Eigen::Index n) {
    const Eigen::Index d = measure->rows();
    return OULiftState(measure, std::vector<Matrix>(measure->size(), Matrix::Zero(n, d)));
  }

  double t() const { return t_; }
  void set_t(double t) { t_ = t; }
  Eigen::Index n() const { return g_.rows(); }
  Eigen::Index d() const { return measure_->rows(); }
  std::size_t k() const { return measure_->size(); }
  const AtomicMatrixMeasure& measure() const { return *measure_; }
  const std::shared_ptr<const AtomicMatrixMeasure>& measure_ptr() const { return measure_; }

  Matrix gamma(std::size_t i) const { return g_.middleCols(static_cast<Eigen::Index>(i) * d(), d()); }
  std::vector<Matrix> gammas() const {
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < k(); ++i) out.push_back(gamma(i));
    return out;
  }
  const Matrix& stacked() const { return g_; }
  Matrix& stacked() { return g_; }

 private:
  double t_ = 0.0;
  std::shared_ptr<const AtomicMatrixMeasure> measure_;
  Matrix g_;
};

/// Exact one-step transition. With `with_brownian` the Brownian increment over
/// the step is sampled jointly as an extra node (x = 0, weight I).
class StepOperator {
 public:
  StepOperator() = default;

  StepOperator(const AtomicMatrixMeasure& nu, double dt, bool with_brownian = false)
      : dt_(dt), d_(nu.rows()), k_(nu.size()), with_brownian_(with_brownian) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step operator: dt must be > 0");
    if (nu.shape() != WeightShape::SymmetricD)
      throw std::invalid_argument("step operator: weights must be symmetric d x d");
    std::vector<double> x = nu.nodes();
    std::vector<Matrix> w = nu.weights();
    if (with_brownian) {
      x.push_back(0.0);
      w.push_back(Matrix::Identity(d_, d_));
    }
    const auto m = static_cast<Eigen::Index>(x.size());
    cov_.resize(m * d_, m * d_);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        cov_.block(i * d_, j * d_, d_, d_) = (w[i] * w[j]) * decay_integral(x[i] + x[j], dt);
    cov_ = symmetrize(cov_);
    factor_ = psd_factor(cov_);
    decay_.resize(static_cast<Eigen::Index>(k_) * d_);
    for (std::size_t i = 0; i < k_; ++i)
      decay_.segment(static_cast<Eigen::Index>(i) * d_, d_).setConstant(std::exp(-nu.node(i) * dt));
  }

  double dt() const { return dt_; }
  Eigen::Index d() const { return d_; }
  std::size_t k() const { return k_; }
  bool with_brownian() const { return with_brownian_; }
  /// Columns of the standard normal noise matrix consumed per step.
  Eigen::Index noise_cols() const { return factor_.rows(); }
  const Vector& decay() const { return decay_; }
  const Matrix& factor() const { return factor_; }
  const Matrix& covariance() const { return cov_; }

  /// g <- g diag(decay) + xi with xi = noise F^T. When the operator carries the
  /// Brownian node, its increment is written to dw (n x d).
  void advance(Matrix& g, const Matrix& noise, Matrix& xi, Matrix* dw = nullptr) const {
    xi.noalias() = noise * factor_.transpose();
    const Eigen::Index kd = static_cast<Eigen::Index>(k_) * d_;
    g = g * decay_.asDiagonal();
    g += xi.leftCols(kd);
    if (dw) {
      if (!with_brownian_) throw std::logic_error("step operator: no Brownian node");
      *dw = xi.rightCols(d_);
    }
  }

 private:
  double dt_ = 0.0;
  Eigen::Index d_ = 0;
  std::size_t k_ = 0;
  bool with_brownian_ = false;
  Vector decay_;
  Matrix factor_;
  Matrix cov_;
};

inline OULiftState exact_step(const OULiftState& state, const StepOperator& op, const Matrix& noise) {
  if (op.k() != state.k() || op.d() != state.d())
    throw std::invalid_argument("exact_step: operator built for a different measure");
  if (noise.rows() != state.n() || noise.cols() != op.noise_cols())
    throw std::invalid_argument("exact_step: noise must be n x (k d)");
  if (!noise.allFinite()) throw std::invalid_argument("exact_step: non-finite noise");
  OULiftState next(state);
  Matrix xi;
  op.advance(next.stacked(), noise, xi);
  next.set_t(state.t() + op.dt());
  return next;
}

/// Canonical projection: total mass of the lift.
inline Matrix project_stacked(const Matrix& g, Eigen::Index d) {
  Matrix x = Matrix::Zero(g.rows(), d);
  for (Eigen::Index c = 0; c < g.cols(); c += d) x += g.middleCols(c, d);
  return x;
}

inline Matrix project_volterra_ou(const OULiftState& state) {
  return project_stacked(state.stacked(), state.d());
}

inline Matrix forward_curve(const OULiftState& state, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("forward_curve: x must be >= 0");
  Matrix f = Matrix::Zero(state.n(), state.d());
  for (std::size_t i = 0; i < state.k(); ++i) f += std::exp(-state.measure().node(i) * x) * state.gamma(i);
  return f;
}

/// h(t) = sum_i exp(-x_i t) gamma0_i, the mean of X_t.
inline Matrix ou_mean(const OULiftState& gamma0, double t) { return forward_curve(gamma0, t); }

/// int_0^t K(s)^2 ds, the row covariance of X_t.
inline Matrix ou_row_covariance(const AtomicMatrixMeasure& nu, double t) {
  const Eigen::Index d = nu.rows();
  Matrix s = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < nu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j)
      s += nu.weight(i) * nu.weight(j) * decay_integral(nu.node(i) + nu.node(j), t);
  return symmetrize(s);
}

/// Increasing record times mapped onto exact steps; one operator per distinct
/// increment.
class OUStepper {
 public:
  OUStepper() = default;

  OUStepper(const AtomicMatrixMeasure& nu, const std::vector<double>& times, bool with_brownian = false)
      : times_(times) {
    double prev = 0.0;
    for (double t : times) {
      if (!(t >= prev)) throw std::invalid_argument("OU stepper: record times must be increasing and >= 0");
      const double dt = t - prev;
      prev = t;
      if (dt == 0.0) {
        index_.push_back(-1);
        continue;
      }
      int found = -1;
      for (std::size_t j = 0; j < ops_.size(); ++j)
        if (std::abs(ops_[j].dt() - dt) <= 1e-12 * dt) found = static_cast<int>(j);
      if (found < 0) {
        ops_.emplace_back(nu, dt, with_brownian);
        found = static_cast<int>(ops_.size()) - 1;
      }
      index_.push_back(found);
    }
  }

  std::size_t size() const { return times_.size(); }
  double time(std::size_t j) const { return times_[j]; }
  /// Operator for the move into record time j, or nullptr when it coincides with the previous one.
  const StepOperator* op(std::size_t j) const { return index_[j] < 0 ? nullptr : &ops_[index_[j]]; }
  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;
  std::vector<StepOperator> ops_;
  std::vector<int> index_;
};

inline std::vector<double> grid_times(const TimeGrid& grid) {
  std::vector<double> t(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) t[j] = grid.time(j);
  return t;
}

/// Simulates X at the record times and hands them to `functional`, which writes
/// `dim` outputs. The functional is called as f(const std::vector<Matrix>& x, double* out).
template <class Functional>
class OUPathSimulator {
 public:
  OUPathSimulator(const OULiftState& gamma0, const std::vector<double>& times, std::size_t dim,
                  Functional functional)
      : g0_(gamma0.stacked()),
        d_(gamma0.d()),
        stepper_(std::make_shared<OUStepper>(gamma0.measure(), times)),
        dim_(dim),
        f_(std::move(functional)),
        x_(times.size()) {}

  std::size_t dimension() const { return dim_; }
  Randomness randomness() const { return Randomness::GaussianOnly; }

  void simulate(PathRng& rng, double* out) {
    g_ = g0_;
    for (std::size_t j = 0; j < stepper_->size(); ++j) {
      if (const StepOperator* op = stepper_->op(j)) {
        noise_.resize(g_.rows(), op->noise_cols());
        rng.fill_gaussian(noise_.data(), static_cast<std::size_t>(noise_.size()));
        op->advance(g_, noise_, xi_);
      }
      x_[j] = project_stacked(g_, d_);
    }
    f_(x_, out);
  }

 private:
  Matrix g0_;
  Eigen::Index d_;
  std::shared_ptr<const OUStepper> stepper_;
  std::size_t dim_;
  Functional f_;
  std::vector<Matrix> x_;
  Matrix g_, noise_, xi_;
};

template <class Functional>
OUPathSimulator<Functional> make_ou_simulator(const OULiftState& gamma0, const std::vector<double>& times,
                                              std::size_t dim, Functional f) {
  return OUPathSimulator<Functional>(gamma0, times, dim, std::move(f));
}

/// Writes X at every record time, flattened row-major.
struct FlattenX {
  void operator()(const std::vector<Matrix>& x, double* out) const {
    std::size_t p = 0;
    for (const auto& m : x)
      for (Eigen::Index a = 0; a < m.rows(); ++a)
        for (Eigen::Index b = 0; b < m.cols(); ++b) out[p++] = m(a, b);
  }
};

}  // namespace vlift
