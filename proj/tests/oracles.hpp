#pragma once

// Reference values computed independently of the library.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace oracle {

/// int_0^inf exp(-x t) x^{-1/2-H} dx / (Gamma(H+1/2) Gamma(1/2-H)) by quadrature
/// after x = exp(s), so the integrand is smooth.
inline double fractional_kernel(double hurst, double t) {
  const double c = 1.0 / (boost::math::tgamma(hurst + 0.5) * boost::math::tgamma(0.5 - hurst));
  auto f = [&](double s) {
    const double x = std::exp(s);
    return std::exp(-x * t + (0.5 - hurst) * s);
  };
  // beyond this window the integrand is below e^{-40} relative
  const double lo = -40.0 / (0.5 - hurst);
  const double hi = std::log(60.0 / t);
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 25, 1e-14, &err);
  return c * v;
}

/// Black-Scholes call with zero rates.
inline double bs_call(double spot, double strike, double total_variance) {
  if (total_variance <= 0.0) return std::max(spot - strike, 0.0);
  const boost::math::normal n;
  const double s = std::sqrt(total_variance);
  const double d1 = (std::log(spot / strike) + 0.5 * total_variance) / s;
  return spot * boost::math::cdf(n, d1) - strike * boost::math::cdf(n, d1 - s);
}

inline Eigen::MatrixXd random_psd(int d, std::mt19937_64& g, double scale = 1.0) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d * d; ++i) a.data()[i] = n(g);
  return scale * (a * a.transpose()) / d;
}

}  // namespace oracle
