#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace vlift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Samples of a matrix-valued function on a uniform grid, one entry per grid point.
using MatrixSeries = std::vector<Matrix>;

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline double min_eigenvalue(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Matrix& a, double tol) { return min_eigenvalue(a) >= -tol; }

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

/// Frobenius norm, i.e. sqrt(Tr(u^T u)); equals sqrt(Tr(u^2)) on symmetric input.
inline double frobenius(const Matrix& a) { return a.norm(); }

inline double max_asymmetry(const Matrix& a) { return max_abs(a - a.transpose()); }

/// Symmetric PSD square root; negative eigenvalues within round-off are clamped.
inline Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Factor F with F F^T = C for a symmetric PSD matrix C. Eigenvalues below
/// clamp_rel * trace(C) are set to zero, so rank-deficient C is accepted.
/// Throws when C has a clearly negative eigenvalue or the residual exceeds
/// 1e-10 * ||C||.
inline Matrix psd_factor(const Matrix& c, double clamp_rel = 1e-14) {
  if (c.rows() != c.cols()) throw std::invalid_argument("psd_factor: matrix not square");
  if (c.size() == 0) return c;
  if (max_asymmetry(c) > 1e-12 * std::max(1.0, max_abs(c)))
    throw std::invalid_argument("psd_factor: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(c));
  const double trace = c.trace();
  const double floor = clamp_rel * std::max(trace, 0.0);
  Vector ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10 * std::max(1.0, std::abs(trace)))
      throw std::invalid_argument("psd_factor: covariance has negative eigenvalue " +
                                  std::to_string(ev(i)));
    ev(i) = ev(i) <= floor ? 0.0 : std::sqrt(ev(i));
  }
  Matrix f = es.eigenvectors() * ev.asDiagonal();
  const double resid = (f * f.transpose() - c).norm();
  if (resid > 1e-10 * std::max(c.norm(), 1e-300) && resid > 1e-300)
    throw std::runtime_error("psd_factor: factorization residual too large");
  return f;
}

/// (1 - exp(-s h)) / s with the removable singularity at s = 0 resolved to h.
inline double decay_integral(double s, double h) {
  if (s * h < 1e-12) return h * (1.0 - 0.5 * s * h);
  return -std::expm1(-s * h) / s;
}

/// Solves R + A R + R A^T = B for R (all d x d) through the Kronecker form.
/// Returns false when the linear system is singular.
inline bool solve_sylvester_shifted(const Matrix& a, const Matrix& b, Matrix& r) {
  const Eigen::Index d = a.rows();
  Matrix sys = Matrix::Identity(d * d, d * d);
  // vec(A R) = (I kron A) vec(R), vec(R A^T) = (A kron I) vec(R), column-major vec.
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = 0; k < d; ++k) {
        sys(i + j * d, k + j * d) += a(i, k);
        sys(i + j * d, i + k * d) += a(j, k);
      }
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible()) return false;
  Vector x = lu.solve(Eigen::Map<const Vector>(b.data(), d * d));
  r = Eigen::Map<Matrix>(x.data(), d, d);
  return true;
}

}  // namespace vlift
