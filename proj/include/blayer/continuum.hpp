#pragma once

// Continuum minimizer rho* = [C_U - U]^+ of E(rho) = 1/2 int rho^2 + int U rho,
// and the interaction energy of rho* under V_gamma(x) = gamma V(gamma x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "blayer/confinement.hpp"
#include "blayer/error.hpp"
#include "blayer/potentials.hpp"
#include "blayer/quadrature.hpp"

namespace blayer {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

class ContinuumDensity {
 public:
  ContinuumDensity(ConfinementPtr U, double C_U, std::vector<Interval> support)
      : U_(std::move(U)), C_(C_U), support_(std::move(support)) {
    rho0_ = std::max(0.0, C_ - U_->value(0.0));
  }

  const ConfiningPotential& confinement() const { return *U_; }
  ConfinementPtr confinement_ptr() const { return U_; }
  double C_U() const { return C_; }
  double rho0() const { return rho0_; }
  const std::vector<Interval>& support() const { return support_; }

  /// rho*(x), zero for x < 0.
  double rho(double x) const {
    if (x < 0.0) return 0.0;
    return std::max(0.0, C_ - U_->value(x));
  }
  double operator()(double x) const { return rho(x); }

  /// rho*(0) on (-inf, 0), rho* on [0, inf).
  double rho_bar(double x) const { return x < 0.0 ? rho0_ : rho(x); }

  /// rho*' on the open support, 0 off it.
  double derivative(double x) const {
    if (x < 0.0 || !in_support(x)) return 0.0;
    return -U_->derivative(x);
  }

  bool in_support(double x) const {
    return std::any_of(support_.begin(), support_.end(),
                       [&](const Interval& I) { return x >= I.lo && x <= I.hi; });
  }

  double support_end() const { return support_.empty() ? 0.0 : support_.back().hi; }

  /// Support endpoints and the breakpoints of U inside the support; rho* is
  /// smooth between consecutive entries.
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (const auto& I : support_) {
      b.push_back(I.lo);
      b.push_back(I.hi);
    }
    for (double x : U_->breakpoints())
      if (in_support(x)) b.push_back(x);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  /// int f rho* over the support. Extra breakpoints and endpoint
  /// singularities of f may be supplied.
  template <class F>
  double integrate(F&& f, const std::vector<double>& breaks = {}, const std::vector<double>& singular = {},
                   double max_width = 0.125) const {
    auto g = [&](double x) { return f(x) * rho(x); };
    std::vector<double> br = breakpoints();
    br.insert(br.end(), breaks.begin(), breaks.end());
    double s = 0.0;
    for (const auto& I : support_) s += quad::integrate_piecewise(g, I.lo, I.hi, br, max_width, singular);
    return s;
  }

  double mass() const {
    return integrate([](double) { return 1.0; });
  }

  /// Quadrature nodes and weights (times rho*) covering the support.
  void nodes(std::vector<double>& x, std::vector<double>& w, double max_width) const {
    const auto br = breakpoints();
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double lo = br[k], hi = br[k + 1];
      if (!in_support(0.5 * (lo + hi))) continue;
      const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_width)));
      const double h = (hi - lo) / panels;
      for (int p = 0; p < panels; ++p) quad::gauss_nodes(lo + p * h, p + 1 == panels ? hi : lo + (p + 1) * h, x, w);
    }
    // weights carry rho*
    for (std::size_t i = 0; i < x.size(); ++i) w[i] *= rho(x[i]);
  }

 private:
  ConfinementPtr U_;
  double C_;
  std::vector<Interval> support_;
  double rho0_ = 0.0;
};

namespace detail {

/// Sublevel set {U < C} as merged intervals, using monotone pieces of U.
inline std::vector<Interval> sublevel_set(const ConfiningPotential& U, double C) {
  const double X0 = U.growth_witness();
  double X = X0 + 1.0;
  while (U.value(X) < C) {
    X = X0 + 2.0 * (X - X0);
    if (X > 1e12)
      throw DomainError("confinement '" + U.name() +
                        "': no level crossing found past the growth witness; supply a larger witness");
  }
  std::vector<double> pts = {0.0, X0, X};
  for (double b : U.breakpoints())
    if (b > 0.0 && b < X) pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  auto crossing = [&](double a, double b) {
    auto f = [&](double x) { return U.value(x) - C; };
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, a, b, f(a), f(b),
                                                     boost::math::tools::eps_tolerance<double>(53), iters);
    return 0.5 * (r.first + r.second);
  };

  std::vector<Interval> out;
  auto add = [&](double lo, double hi) {
    if (!(hi > lo)) return;
    if (!out.empty() && out.back().hi >= lo) {
      out.back().hi = std::max(out.back().hi, hi);
    } else {
      out.push_back({lo, hi});
    }
  };
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k], b = pts[k + 1];
    const double ua = U.value(a) - C, ub = U.value(b) - C;
    if (ua < 0.0 && ub < 0.0) {
      add(a, b);
    } else if (ua < 0.0) {
      add(a, ub == 0.0 ? b : crossing(a, b));
    } else if (ub < 0.0) {
      add(ua == 0.0 ? a : crossing(a, b), b);
    }
  }
  return out;
}

inline double sublevel_mass(const ConfiningPotential& U, double C, const std::vector<Interval>& set) {
  std::vector<double> br = U.breakpoints();
  double s = 0.0;
  for (const auto& I : set)
    s += quad::integrate_piecewise([&](double x) { return C - U.value(x); }, I.lo, I.hi, br, 0.25);
  return s;
}

}  // namespace detail

/// C_U with int [C_U - U]^+ = 1, and the support of rho*.
inline ContinuumDensity solve_continuum(ConfinementPtr U, double tol = 1e-12) {
  if (!U) throw DomainError("solve_continuum: null confinement");
  auto M = [&](double C) { return detail::sublevel_mass(*U, C, detail::sublevel_set(*U, C)) - 1.0; };
  double lo = 0.0, hi = 1.0;
  while (M(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw DomainError("solve_continuum: cannot bracket C_U");
  }
  std::uintmax_t iters = 300;
  const auto r = boost::math::tools::toms748_solve(M, lo, hi, M(lo), M(hi),
                                                   boost::math::tools::eps_tolerance<double>(53), iters);
  // pick the bracket end with the smaller residual
  const double C = std::abs(M(r.first)) <= std::abs(M(r.second)) ? r.first : r.second;
  const double residual = std::abs(M(C));
  if (!(residual <= tol))
    throw SolverError("solve_continuum: mass residual above tolerance", {C}, residual);
  return ContinuumDensity(U, C, detail::sublevel_set(*U, C));
}

/// E(rho) = 1/2 int rho^2 + int U rho for rho sampled on a uniform grid.
/// Composite Simpson; with an even number of points the last three
/// intervals use the 3/8 rule.
inline double energy_E(const std::vector<double>& x, const std::vector<double>& rho, const ConfiningPotential& U,
                       double mass_tol = 1e-6) {
  const std::size_t m = x.size();
  if (m < 4 || rho.size() != m) throw DomainError("energy_E: need at least four matching samples");
  const double h = (x.back() - x.front()) / static_cast<double>(m - 1);
  for (std::size_t i = 1; i < m; ++i)
    if (std::abs(x[i] - x[i - 1] - h) > 1e-9 * h) throw DomainError("energy_E: grid must be uniform");
  for (double r : rho)
    if (!(r >= 0.0)) throw DomainError("energy_E: density must be nonnegative");

  auto rule = [&](auto&& f) {
    const std::size_t simpson_end = (m % 2 == 1) ? m - 1 : m - 4;
    double s = 0.0;
    for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) s += h / 3.0 * (f(i) + 4.0 * f(i + 1) + f(i + 2));
    if (m % 2 == 0) {
      const std::size_t i = m - 4;
      s += 3.0 * h / 8.0 * (f(i) + 3.0 * f(i + 1) + 3.0 * f(i + 2) + f(i + 3));
    }
    return s;
  };
  const double mass = rule([&](std::size_t i) { return rho[i]; });
  if (std::abs(mass - 1.0) > mass_tol)
    throw DomainError("energy_E: density is not normalized (mass " + std::to_string(mass) + ")");
  return rule([&](std::size_t i) { return 0.5 * rho[i] * rho[i] + U.value(x[i]) * rho[i]; });
}

/// E(rho*) by Gauss quadrature on the support.
inline double energy_E(const ContinuumDensity& rho) {
  const auto& U = rho.confinement();
  return rho.integrate([&](double x) { return 0.5 * rho.rho(x) + U.value(x); });
}

/// int V(s) [f(x - s/gamma) + f(x + s/gamma)] ds over s > 0, i.e. (V_gamma * f)(x),
/// where f is smooth between the listed breakpoints.
template <class F>
double kernel_average(const InteractionPotential& V, double gamma, double x, F&& f, const std::vector<double>& breaks) {
  const double cut = V.cutoff();
  std::vector<double> sb;
  for (double b : breaks) {
    const double s = gamma * std::abs(x - b);
    if (s > 0.0 && s < cut) sb.push_back(s);
  }
  auto integrand = [&](double s) { return V.value(s) * (f(x - s / gamma) + f(x + s / gamma)); };
  const double width = 0.5;
  return quad::integrate_piecewise(integrand, 0.0, cut, sb, width, {0.0});
}

/// (V_gamma * rho*)(x), rho* extended by zero.
inline double convolve_rho(const ContinuumDensity& rho, const InteractionPotential& V, double gamma, double x) {
  return kernel_average(V, gamma, x, [&](double y) { return rho.rho(y); }, rho.breakpoints());
}

/// 1/2 int int V_gamma(x - y) rho*(x) rho*(y) via the autocorrelation
/// A(t) = int rho*(x) rho*(x + t) dx:  int_0^inf V(s) A(s / gamma) ds.
inline double interaction_direct(const ContinuumDensity& rho, const InteractionPotential& V, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("interaction energy requires gamma > 0");
  const auto B = rho.breakpoints();
  if (B.empty()) return 0.0;
  const double lo = B.front(), hi = B.back();
  auto A = [&](double t) {
    if (t >= hi - lo) return 0.0;
    std::vector<double> br = B;
    for (double b : B) br.push_back(b - t);
    return rho.integrate([&](double y) { return rho.rho(y + t); }, br);
  };
  std::vector<double> sb;
  for (double a : B)
    for (double b : B)
      if (a > b && gamma * (a - b) < V.cutoff()) sb.push_back(gamma * (a - b));
  const double end = std::min(V.cutoff(), gamma * (hi - lo));
  return quad::integrate_piecewise([&](double s) { return V.value(s) * A(s / gamma); }, 0.0, end, sb, 0.5,
                                   {0.0});
}

struct SpectralOptions {
  double omega_max = 200.0;  // frequency cut before the asymptotic tail
};

/// 1/2 int int V_gamma(x - y) rho*(x) rho*(y) as int_0^inf v(w/gamma) |rho^(w)|^2 dw.
/// Frequencies past omega_max use the non-oscillatory part of the jump
/// expansion of |rho^|^2.
inline double interaction_spectral(const ContinuumDensity& rho, const InteractionPotential& V, double gamma,
                                   const SpectralOptions& opt = {}) {
  if (!(gamma > 0.0)) throw DomainError("interaction energy requires gamma > 0");
  const double Om = opt.omega_max;
  std::vector<double> xn, xw;
  // 20-point panels resolve e^{ikx} to roundoff while k * width <= ~20
  const double width = std::min(0.125, 16.0 / (2.0 * kPi * Om));
  rho.nodes(xn, xw, width);
  if (xn.empty()) return 0.0;

  auto rho_hat2 = [&](double w) {
    const double k = 2.0 * kPi * w;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < xn.size(); ++i) {
      re += xw[i] * std::cos(k * xn[i]);
      im += xw[i] * std::sin(k * xn[i]);
    }
    return re * re + im * im;
  };
  const double span = rho.support_end() - rho.support().front().lo;
  const double body = quad::integrate_uniform([&](double w) { return V.fourier(w / gamma) * rho_hat2(w); }, 0.0,
                                              Om, std::min(0.5, 0.5 / span));

  // Jumps of rho* and its first two derivatives at the support endpoints.
  double c2 = 0.0, c4 = 0.0;
  const auto& U = rho.confinement();
  for (const auto& I : rho.support()) {
    for (int side = 0; side < 2; ++side) {
      const double b = side == 0 ? I.lo : I.hi;
      const double sgn = side == 0 ? 1.0 : -1.0;  // inside minus outside
      const double j0 = sgn * rho.rho(b);
      const double j1 = sgn * (-U.derivative(b));
      const double j2 = sgn * (-U.second_derivative(b));
      c2 += j0 * j0;
      c4 += j1 * j1 - 2.0 * j0 * j2;
    }
  }
  // int_Om^inf v(w/gamma) w^-p dw with w = Om/t.
  auto moment = [&](int p) {
    return quad::integrate_graded(
        [&](double t) { return V.fourier(Om / (gamma * t)) * std::pow(t, p - 2) / std::pow(Om, p - 1); }, 0.0, 1.0,
        true, 40, 0.5);
  };
  const double tail = c2 / (4.0 * kPi * kPi) * moment(2) + c4 / (16.0 * std::pow(kPi, 4)) * moment(4);
  return body + tail;
}

/// E^gamma(rho*) = 1/2 int int V_gamma rho* rho* + int U rho*. The spectral
/// value is returned after a cross-check against the direct route.
inline double energy_Egamma(const ContinuumDensity& rho, const InteractionPotential& V, double gamma,
                            double cross_tol = 1e-5) {
  const double spectral = interaction_spectral(rho, V, gamma);
  const double direct = interaction_direct(rho, V, gamma);
  if (std::abs(spectral - direct) > cross_tol * std::abs(direct))
    throw ConsistencyError("energy_Egamma: spectral " + std::to_string(spectral) + " vs direct " +
                               std::to_string(direct),
                           spectral, direct);
  const auto& U = rho.confinement();
  return spectral + rho.integrate([&](double x) { return U.value(x); });
}

}  // namespace blayer
