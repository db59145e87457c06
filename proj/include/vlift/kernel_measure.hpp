#pragma once

// Kernels represented as Laplace transforms of atomic matrix measures:
//   K(t) = sum_i w_i exp(-x_i t).
// Also hosts the fractional exponential-sum fit, grid convolution and the
// symmetrized resolvent of the second kind.

#include "vlift/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vlift {

enum class WeightShape { SymmetricD, GeneralNxD };

inline const char* to_string(WeightShape s) {
  return s == WeightShape::SymmetricD ? "SymmetricD" : "GeneralNxD";
}

class AtomicMatrixMeasure {
 public:
  AtomicMatrixMeasure() = default;

  AtomicMatrixMeasure(std::vector<double> nodes, std::vector<Matrix> weights,
                      WeightShape shape = WeightShape::SymmetricD)
      : nodes_(std::move(nodes)), weights_(std::move(weights)), shape_(shape) {
    if (nodes_.empty()) throw std::invalid_argument("measure: at least one node required");
    if (nodes_.size() != weights_.size())
      throw std::invalid_argument("measure: node count and weight count differ");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!std::isfinite(nodes_[i]) || nodes_[i] < 0.0)
        throw std::invalid_argument("measure: nodes must be finite and >= 0");
      if (i > 0 && !(nodes_[i] > nodes_[i - 1]))
        throw std::invalid_argument("measure: nodes must be strictly increasing");
    }
    const auto r = weights_.front().rows();
    const auto c = weights_.front().cols();
    for (const auto& w : weights_) {
      if (w.rows() != r || w.cols() != c)
        throw std::invalid_argument("measure: weights must share dimensions");
      if (!w.allFinite()) throw std::invalid_argument("measure: non-finite weight");
    }
    if (shape_ == WeightShape::SymmetricD) {
      if (r != c) throw std::invalid_argument("measure: SymmetricD weights must be square");
      for (const auto& w : weights_)
        if (max_asymmetry(w) > 1e-12 * std::max(1.0, max_abs(w)))
          throw std::invalid_argument("measure: SymmetricD weight is not symmetric");
    }
  }

  std::size_t size() const { return nodes_.size(); }
  Eigen::Index rows() const { return weights_.empty() ? 0 : weights_.front().rows(); }
  Eigen::Index cols() const { return weights_.empty() ? 0 : weights_.front().cols(); }
  WeightShape shape() const { return shape_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  double node(std::size_t i) const { return nodes_[i]; }
  const Matrix& weight(std::size_t i) const { return weights_[i]; }
  double max_node() const { return nodes_.back(); }

  /// Throws unless every weight has minimum eigenvalue >= -eps.
  void require_psd(double eps = 1e-12) const {
    for (std::size_t i = 0; i < weights_.size(); ++i)
      if (!is_psd(weights_[i], eps))
        throw std::invalid_argument("measure: weight " + std::to_string(i) +
                                    " is not positive semidefinite");
  }

  bool all_diagonal() const {
    for (const auto& w : weights_)
      if (max_abs(Matrix(w) - Matrix(w.diagonal().asDiagonal())) > 0.0) return false;
    return true;
  }

 private:
  std::vector<double> nodes_;
  std::vector<Matrix> weights_;
  WeightShape shape_ = WeightShape::SymmetricD;
};

class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double dt, std::size_t steps) : dt_(dt), steps_(steps) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("grid: dt must be > 0");
  }

  /// Builds a grid from explicit times; they must start at 0 and be uniformly
  /// spaced within 1e-12 relative tolerance.
  static TimeGrid from_times(const std::vector<double>& t) {
    if (t.size() < 2) throw std::invalid_argument("grid: need at least two times");
    if (std::abs(t[0]) > 1e-14) throw std::invalid_argument("grid: first time must be 0");
    const double dt = t[1] - t[0];
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      const double di = t[i + 1] - t[i];
      if (std::abs(di - dt) > 1e-12 * std::max(std::abs(dt), std::abs(di)))
        throw std::invalid_argument("grid: times are not uniformly spaced");
    }
    return TimeGrid(dt, t.size() - 1);
  }

  static TimeGrid over(double horizon, std::size_t steps) {
    if (steps == 0) throw std::invalid_argument("grid: steps must be positive");
    return TimeGrid(horizon / static_cast<double>(steps), steps);
  }

  double dt() const { return dt_; }
  std::size_t steps() const { return steps_; }
  std::size_t size() const { return steps_ + 1; }
  double time(std::size_t i) const { return dt_ * static_cast<double>(i); }
  double horizon() const { return time(steps_); }

 private:
  double dt_ = 1.0;
  std::size_t steps_ = 0;
};

inline Matrix eval_kernel(const AtomicMatrixMeasure& m, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("eval_kernel: t must be >= 0");
  Matrix k = Matrix::Zero(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) k += std::exp(-m.node(i) * t) * m.weight(i);
  return k;
}

inline AtomicMatrixMeasure semigroup_apply(const AtomicMatrixMeasure& m, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply: t must be >= 0");
  std::vector<Matrix> w(m.weights());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= std::exp(-m.node(i) * t);
  return AtomicMatrixMeasure(m.nodes(), std::move(w), m.shape());
}

/// Samples K on a grid; the value at t = 0 is K(0+), which for an exponential
/// sum is just K(0).
inline MatrixSeries sample_kernel(const AtomicMatrixMeasure& m, const TimeGrid& grid,
                                  double shift = 0.0) {
  MatrixSeries out;
  out.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out.push_back(eval_kernel(m, grid.time(j) + shift));
  return out;
}

// ---------------------------------------------------------------------------
// Fractional kernels

struct FractionalKernelSpec {
  Matrix hurst;  // symmetric, entries in (0, 1/2)
  double t_min = 1e-3;
  double t_max = 10.0;
  std::size_t node_count = 20;
  /// When set, a fit whose sup relative error exceeds this value is an error.
  std::optional<double> tolerance;
};

struct FractionalFit {
  AtomicMatrixMeasure measure;
  double sup_rel_error = 0.0;  // over all entries, on the reported check grid
  std::size_t check_points = 0;
};

/// Normalized target t^{H-1/2} / Gamma(H+1/2).
inline double fractional_kernel_target(double hurst, double t) {
  return std::pow(t, hurst - 0.5) / std::tgamma(hurst + 0.5);
}

namespace detail {

// Nodes geometric on [lo/t_max, hi/t_min]; weight of node i is the exact mass
// of c_H x^{-1/2-H} dx over its log-cell. The first cell reaches down to 0 and
// its node sits at the cell's mean location.
struct FractionalNodes {
  std::vector<double> x;
  std::vector<double> cell_edges;  // k+1 edges, first is 0
};

inline FractionalNodes fractional_nodes(std::size_t k, double x_min, double x_max, double hurst_ref) {
  FractionalNodes out;
  const double s0 = std::log(x_min);
  const double h = (std::log(x_max) - s0) / static_cast<double>(k - 1);
  out.x.resize(k);
  out.cell_edges.resize(k + 1);
  out.cell_edges[0] = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.x[i] = std::exp(s0 + h * static_cast<double>(i));
    out.cell_edges[i + 1] = std::exp(s0 + h * (static_cast<double>(i) + 0.5));
  }
  // mean of x over [0, b] under x^{-1/2-H}: a/(a+1) b with a = 1/2 - H
  const double a = 0.5 - hurst_ref;
  out.x[0] = a / (a + 1.0) * out.cell_edges[1];
  return out;
}

inline std::vector<double> fractional_weights(const FractionalNodes& nodes, double hurst) {
  const double a = 0.5 - hurst;
  const double c = 1.0 / (std::tgamma(hurst + 0.5) * std::tgamma(0.5 - hurst));
  std::vector<double> w(nodes.x.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = c * (std::pow(nodes.cell_edges[i + 1], a) - std::pow(nodes.cell_edges[i], a)) / a;
  return w;
}

inline double scalar_sup_rel_error(const std::vector<double>& x, const std::vector<double>& w,
                                   double hurst, double t_min, double t_max, std::size_t points) {
  double worst = 0.0;
  const double ls = std::log(t_min);
  const double step = (std::log(t_max) - ls) / static_cast<double>(points - 1);
  for (std::size_t j = 0; j < points; ++j) {
    const double t = std::exp(ls + step * static_cast<double>(j));
    double k = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) k += w[i] * std::exp(-x[i] * t);
    worst = std::max(worst, std::abs(k / fractional_kernel_target(hurst, t) - 1.0));
  }
  return worst;
}

}  // namespace detail

/// Sup relative error of entry (a,b) of a fitted measure against the normalized
/// fractional target, on `points` log-spaced times in [t_min, t_max].
inline double fractional_fit_error(const AtomicMatrixMeasure& m, const Matrix& hurst, double t_min,
                                   double t_max, std::size_t points) {
  double worst = 0.0;
  std::vector<double> w(m.size());
  for (Eigen::Index a = 0; a < hurst.rows(); ++a)
    for (Eigen::Index b = 0; b < hurst.cols(); ++b) {
      for (std::size_t i = 0; i < m.size(); ++i) w[i] = m.weight(i)(a, b);
      worst = std::max(worst, detail::scalar_sup_rel_error(m.nodes(), w, hurst(a, b), t_min,
                                                           t_max, points));
    }
  return worst;
}

inline FractionalFit fit_fractional_measure(const FractionalKernelSpec& spec) {
  const Matrix& hu = spec.hurst;
  if (hu.rows() == 0 || hu.rows() != hu.cols())
    throw std::invalid_argument("fractional fit: hurst matrix must be square and non-empty");
  if (max_asymmetry(hu) > 0.0) throw std::invalid_argument("fractional fit: hurst must be symmetric");
  for (Eigen::Index i = 0; i < hu.size(); ++i)
    if (!(hu.data()[i] > 0.0 && hu.data()[i] < 0.5))
      throw std::invalid_argument("fractional fit: Hurst indices must lie in (0, 1/2)");
  if (!(spec.t_min > 0.0 && spec.t_max > spec.t_min))
    throw std::invalid_argument("fractional fit: need 0 < t_min < t_max");
  if (spec.node_count < 2) throw std::invalid_argument("fractional fit: node count must be >= 2");

  constexpr std::size_t kCheckPoints = 400;
  constexpr int kSearch = 25;
  const std::size_t k = spec.node_count;
  const double h_ref = hu.minCoeff();

  // Span search: lower factor in [1e-3, 1], upper factor in [1, 100], log-spaced.
  double best_err = std::numeric_limits<double>::infinity();
  double best_lo = 1.0, best_hi = 1.0;
  for (int i = 0; i < kSearch; ++i) {
    const double lo = std::pow(10.0, -3.0 + 3.0 * i / (kSearch - 1));
    for (int j = 0; j < kSearch; ++j) {
      const double hi = std::pow(10.0, 2.0 * j / (kSearch - 1));
      const auto nodes = detail::fractional_nodes(k, lo / spec.t_max, hi / spec.t_min, h_ref);
      double err = 0.0;
      for (Eigen::Index a = 0; a < hu.rows() && err < best_err; ++a)
        for (Eigen::Index b = a; b < hu.cols(); ++b) {
          const auto w = detail::fractional_weights(nodes, hu(a, b));
          err = std::max(err, detail::scalar_sup_rel_error(nodes.x, w, hu(a, b), spec.t_min,
                                                           spec.t_max, kCheckPoints));
        }
      if (err < best_err) {
        best_err = err;
        best_lo = lo;
        best_hi = hi;
      }
    }
  }

  const auto nodes = detail::fractional_nodes(k, best_lo / spec.t_max, best_hi / spec.t_min, h_ref);
  std::vector<Matrix> weights(k, Matrix::Zero(hu.rows(), hu.cols()));
  for (Eigen::Index a = 0; a < hu.rows(); ++a)
    for (Eigen::Index b = 0; b < hu.cols(); ++b) {
      const auto w = detail::fractional_weights(nodes, hu(a, b));
      for (std::size_t i = 0; i < k; ++i) weights[i](a, b) = w[i];
    }
  if (spec.tolerance && best_err > *spec.tolerance)
    throw std::runtime_error("fractional fit: tolerance " + std::to_string(*spec.tolerance) +
                             " infeasible with " + std::to_string(k) +
                             " nodes, best sup relative error " + std::to_string(best_err));
  return FractionalFit{AtomicMatrixMeasure(nodes.x, std::move(weights)), best_err, kCheckPoints};
}

// ---------------------------------------------------------------------------
// Grid convolution and resolvent

namespace detail {

// Samples of an r x c matrix function stored contiguously, column-major per sample.
struct FlatSeries {
  Eigen::Index rows = 0, cols = 0;
  std::vector<double> data;

  FlatSeries(Eigen::Index r, Eigen::Index c, std::size_t n) : rows(r), cols(c), data(n * r * c, 0.0) {}
  explicit FlatSeries(const MatrixSeries& s) : FlatSeries(s.front().rows(), s.front().cols(), s.size()) {
    for (std::size_t m = 0; m < s.size(); ++m)
      Eigen::Map<Matrix>(at(m), rows, cols) = s[m];
  }
  double* at(std::size_t m) { return data.data() + m * rows * cols; }
  const double* at(std::size_t m) const { return data.data() + m * rows * cols; }
  Matrix matrix(std::size_t m) const { return Eigen::Map<const Matrix>(at(m), rows, cols); }
};

// acc += w * a * b with a (r x l), b (l x c), all column-major.
inline void gemm_acc(double* acc, const double* a, const double* b, Eigen::Index r, Eigen::Index l,
                     Eigen::Index c, double w) {
  for (Eigen::Index q = 0; q < c; ++q)
    for (Eigen::Index j = 0; j < l; ++j) {
      const double bj = w * b[j + q * l];
      for (Eigen::Index p = 0; p < r; ++p) acc[p + q * r] += a[p + j * r] * bj;
    }
}

// acc += w (a b + b a) for d x d blocks.
inline void gemm_both(double* acc, const double* a, const double* b, Eigen::Index d, double w) {
  if (d == 1) {
    acc[0] += 2.0 * w * a[0] * b[0];
    return;
  }
  gemm_acc(acc, a, b, d, d, d, w);
  gemm_acc(acc, b, a, d, d, d, w);
}

inline void check_samples(const MatrixSeries& f, const MatrixSeries& g, const TimeGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw std::invalid_argument("convolve: samples do not match the grid");
  if (f.front().cols() != g.front().rows())
    throw std::invalid_argument("convolve: incompatible matrix dimensions");
  for (const auto& m : f)
    if (m.rows() != f.front().rows() || m.cols() != f.front().cols())
      throw std::invalid_argument("convolve: samples change dimension");
  for (const auto& m : g)
    if (m.rows() != g.front().rows() || m.cols() != g.front().cols())
      throw std::invalid_argument("convolve: samples change dimension");
}

// Composite Simpson weights for m intervals (3/8 rule on the last three when m
// is odd, trapezoid when m == 1).
inline std::vector<double> simpson_weights(std::size_t m) {
  std::vector<double> w(m + 1, 0.0);
  if (m == 1) {
    w[0] = w[1] = 0.5;
    return w;
  }
  const std::size_t even = (m % 2 == 0) ? m : m - 3;
  for (std::size_t j = 0; j + 2 <= even; j += 2) {
    w[j] += 1.0 / 3.0;
    w[j + 1] += 4.0 / 3.0;
    w[j + 2] += 1.0 / 3.0;
  }
  if (even != m) {
    w[even] += 3.0 / 8.0;
    w[even + 1] += 9.0 / 8.0;
    w[even + 2] += 9.0 / 8.0;
    w[even + 3] += 3.0 / 8.0;
  }
  return w;
}

template <class Weights>
MatrixSeries convolve_weighted(const MatrixSeries& f, const MatrixSeries& g, const TimeGrid& grid, Weights weights) {
  check_samples(f, g, grid);
  const FlatSeries ff(f), gg(g);
  const Eigen::Index r = ff.rows, l = ff.cols, c = gg.cols;
  MatrixSeries out(grid.size(), Matrix::Zero(r, c));
  std::vector<double> acc(static_cast<std::size_t>(r * c));
  for (std::size_t m = 1; m < grid.size(); ++m) {
    const std::vector<double> w = weights(m);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j <= m; ++j)
      if (w[j] != 0.0) gemm_acc(acc.data(), ff.at(m - j), gg.at(j), r, l, c, w[j]);
    out[m] = grid.dt() * Eigen::Map<const Matrix>(acc.data(), r, c);
  }
  return out;
}

}  // namespace detail

/// Trapezoidal (f*g)(t_m) = int_0^{t_m} f(t_m - s) g(s) ds on a uniform grid.
inline MatrixSeries convolve(const MatrixSeries& f, const MatrixSeries& g, const TimeGrid& grid) {
  return detail::convolve_weighted(f, g, grid, [](std::size_t m) {
    std::vector<double> w(m + 1, 1.0);
    w.front() = w.back() = 0.5;
    return w;
  });
}

/// Higher-order (Simpson) grid convolution, used to measure residuals
/// independently of the trapezoidal solvers.
inline MatrixSeries convolve_simpson(const MatrixSeries& f, const MatrixSeries& g, const TimeGrid& grid) {
  return detail::convolve_weighted(f, g, grid, detail::simpson_weights);
}

class ResolventError : public std::runtime_error {
 public:
  ResolventError(std::size_t index, const std::string& what)
      : std::runtime_error(what + " at grid index " + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Solves K*R + R*K = K - R on the grid. The convolutions use the trapezoid
/// rule and the unknown R(t_m) enters implicitly, so each step solves
/// R + A R + R A = B with A = dt/2 K(0).
inline MatrixSeries resolvent_second_kind(const MatrixSeries& k, const TimeGrid& grid) {
  if (k.size() != grid.size()) throw std::invalid_argument("resolvent: samples do not match the grid");
  const Eigen::Index d = k.front().rows();
  for (const auto& km : k)
    if (km.rows() != d || km.cols() != d) throw std::invalid_argument("resolvent: kernel must be d x d");
  if (max_asymmetry(k.front()) > 1e-12 * std::max(1.0, max_abs(k.front())))
    throw std::invalid_argument("resolvent: K(0) must be symmetric");
  const double dt = grid.dt();
  const detail::FlatSeries kk(k);
  detail::FlatSeries rr(d, d, grid.size());
  Eigen::Map<Matrix>(rr.at(0), d, d) = k[0];
  const Matrix a = 0.5 * dt * k[0];
  std::vector<double> acc(static_cast<std::size_t>(d * d));
  Matrix rm;
  for (std::size_t m = 1; m < grid.size(); ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    detail::gemm_both(acc.data(), kk.at(m), rr.at(0), d, 0.5);
    for (std::size_t j = 1; j < m; ++j) detail::gemm_both(acc.data(), kk.at(m - j), rr.at(j), d, 1.0);
    const Matrix rhs = k[m] - dt * Eigen::Map<const Matrix>(acc.data(), d, d);
    if (!solve_sylvester_shifted(a, rhs, rm)) throw ResolventError(m, "resolvent: singular step");
    if (!rm.allFinite()) throw ResolventError(m, "resolvent: non-finite value");
    Eigen::Map<Matrix>(rr.at(m), d, d) = rm;
  }
  MatrixSeries out;
  out.reserve(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) out.push_back(rr.matrix(m));
  return out;
}

/// Sup-norm residual of K*R + R*K - (K - R) over the grid, with convolutions
/// evaluated by the Simpson rule.
inline double resolvent_residual(const MatrixSeries& k, const MatrixSeries& r, const TimeGrid& grid) {
  const auto kr = convolve_simpson(k, r, grid);
  const auto rk = convolve_simpson(r, k, grid);
  double worst = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m)
    worst = std::max(worst, max_abs(kr[m] + rk[m] - (k[m] - r[m])));
  return worst;
}

}  // namespace vlift
