#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls the library's quadrature or solvers.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

inline constexpr double kPi = std::numbers::pi;

/// Direct formula x coth x - log(2 sinh x), long double.
inline double wall_raw_direct(double x) {
  const long double lx = x;
  return static_cast<double>(lx * std::cosh(lx) / std::sinh(lx) - std::log(2.0L * std::sinh(lx)));
}

/// d/dx of the direct formula: -x / sinh^2 x.
inline double wall_raw_derivative_direct(double x) {
  const long double lx = x;
  const long double sh = std::sinh(lx);
  return static_cast<double>(-lx / (sh * sh));
}

/// int_R V_wall,raw via term-by-term series: 2 * (sum 1/(2k^2) + sum 1/(2k^2)).
inline double wall_raw_mass_series(int terms = 2000000) {
  long double s = 0.0L;
  for (int k = terms; k >= 1; --k) s += 1.0L / (static_cast<long double>(k) * k);
  s += 1.0L / terms;  // integral tail of sum 1/k^2
  return static_cast<double>(2.0L * s);
}

/// int_a^b f with tanh-sinh (endpoint singularities allowed).
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, a, b);
}

inline double kronrod(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 8, 1e-12);
}

/// 2 int_0^X V(x) cos(2 pi w x) dx: singular piece [0, s] by tanh-sinh,
/// remainder by Kronrod panels short enough to resolve the oscillation.
inline double cosine_transform(const std::function<double(double)>& V, double omega, double X = 30.0,
                               double s = 0.5) {
  const double k = 2.0 * kPi * omega;
  auto f = [&](double x) { return V(x) * std::cos(k * x); };
  double total = tanh_sinh(f, 0.0, s);
  const double width = std::min(0.5, 0.5 / (std::abs(omega) + 1e-12));
  for (double a = s; a < X; a += width) total += kronrod(f, a, std::min(X, a + width));
  return 2.0 * total;
}

/// Bisection for a root of f on [a, b] with f(a) f(b) < 0.
inline double bisect(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  double fa = f(a);
  for (int i = 0; i < iters; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Least-squares slope and intercept of y on x.
inline std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

}  // namespace oracle
