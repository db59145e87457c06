#pragma once

// Volterra Wishart process V = X^T X and its Laplace transform.

#include "vlift/ou_lift.hpp"

namespace vlift {

struct WishartPathRecord {
  TimeGrid grid;
  std::vector<Matrix> X;
  std::vector<Matrix> V;
};

struct WishartTransformQuery {
  double t = 0.0;
  Matrix c;  // n x d, argument u = c^T c
  OULiftState gamma0;
};

struct WishartAffineSplit {
  double phi = 0.0;      // (n/2) log det(I + 2 Sigma_t u)
  double pairing = 0.0;  // quadratic form in the initial lift
  double value() const { return std::exp(-phi - pairing); }
};

inline Matrix wishart_from_x(const Matrix& x) { return symmetrize(x.transpose() * x); }

/// All paths recorded on the grid; path p uses stream (seed, p).
inline std::vector<WishartPathRecord> simulate_wishart(const OULiftState& gamma0, const TimeGrid& grid,
                                                       std::size_t paths, std::uint64_t seed,
                                                       unsigned workers = 1) {
  const auto times = grid_times(grid);
  const std::size_t nd = static_cast<std::size_t>(gamma0.n() * gamma0.d());
  auto sim = make_ou_simulator(gamma0, times, nd * times.size(), FlattenX{});
  const auto raw = collect_paths(sim, paths, seed, workers);
  std::vector<WishartPathRecord> out;
  out.reserve(paths);
  for (const auto& r : raw) {
    WishartPathRecord rec{grid, {}, {}};
    for (std::size_t j = 0; j < times.size(); ++j) {
      Matrix x(gamma0.n(), gamma0.d());
      for (Eigen::Index a = 0; a < x.rows(); ++a)
        for (Eigen::Index b = 0; b < x.cols(); ++b)
          x(a, b) = r(static_cast<Eigen::Index>(j * nd) + a * x.cols() + b);
      rec.V.push_back(wishart_from_x(x));
      rec.X.push_back(std::move(x));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// E[V_t] = h(t)^T h(t) + n int_0^t K^2.
inline Matrix wishart_mean(const OULiftState& gamma0, double t) {
  const Matrix h = ou_mean(gamma0, t);
  return symmetrize(h.transpose() * h + static_cast<double>(gamma0.n()) * ou_row_covariance(gamma0.measure(), t));
}

inline WishartAffineSplit affine_transform_wishart(const WishartTransformQuery& q) {
  if (!(q.t >= 0.0)) throw std::invalid_argument("wishart transform: t must be >= 0");
  const Eigen::Index d = q.gamma0.d();
  const Eigen::Index n = q.gamma0.n();
  if (q.c.rows() != n || q.c.cols() != d) throw std::invalid_argument("wishart transform: c must be n x d");
  const Matrix u = q.c.transpose() * q.c;
  const Matrix sigma = ou_row_covariance(q.gamma0.measure(), q.t);
  const Matrix id = Matrix::Identity(d, d);
  const Matrix a = id + 2.0 * sigma * u;
  Eigen::PartialPivLU<Matrix> lu(a);
  const double det = lu.determinant();
  if (!(det > 0.0) || !std::isfinite(det))
    throw std::runtime_error("wishart transform: I + 2 Sigma u is not positive definite");
  // (I + 2 u Sigma)^{-1} u = u (I + 2 Sigma u)^{-1}, symmetric.
  const Matrix m = symmetrize(u * lu.inverse());
  const Matrix h = ou_mean(q.gamma0, q.t);
  WishartAffineSplit s;
  s.phi = 0.5 * static_cast<double>(n) * std::log(det);
  s.pairing = (h * m * h.transpose()).trace();
  return s;
}

/// E[exp(-Tr(c^T c V_t))] in closed form.
inline double closed_form_laplace(const WishartTransformQuery& q) { return affine_transform_wishart(q).value(); }

/// Factor a PSD u as c^T c with c of shape n x d. Rank above n is rejected.
inline Matrix wishart_argument_from_u(const Matrix& u, Eigen::Index n, double eps = 1e-12) {
  if (u.rows() != u.cols()) throw std::invalid_argument("wishart argument: u must be square");
  const Eigen::Index d = u.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(u));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -eps * scale)
    throw std::invalid_argument("wishart argument: u is not positive semidefinite");
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    if (es.eigenvalues()(i) > eps * scale) ++rank;
  if (rank > n)
    throw std::invalid_argument("wishart argument: rank of u (" + std::to_string(rank) +
                                ") exceeds n = " + std::to_string(n));
  Matrix c = Matrix::Zero(n, d);
  if (n >= d) {
    c.topRows(d) = psd_sqrt(u);
  } else {
    // keep the leading n eigen-directions
    Eigen::Index row = 0;
    for (Eigen::Index i = d - 1; i >= 0 && row < n; --i, ++row)
      c.row(row) = std::sqrt(std::max(es.eigenvalues()(i), 0.0)) * es.eigenvectors().col(i).transpose();
  }
  return c;
}

/// Monte Carlo functional: exp(-Tr(u_j V_{t_j})) for test points j sharing a path.
struct WishartLaplaceFunctional {
  std::vector<Matrix> u;
  std::vector<std::size_t> time_index;

  void operator()(const std::vector<Matrix>& x, double* out) const {
    for (std::size_t j = 0; j < u.size(); ++j) {
      const Matrix& xj = x[time_index[j]];
      out[j] = std::exp(-(xj * u[j] * xj.transpose()).trace());
    }
  }
};

}  // namespace vlift
