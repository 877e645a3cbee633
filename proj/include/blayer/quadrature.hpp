#pragma once

// Composite Gauss-Legendre rules, geometrically graded meshes for endpoint
// singularities, and an adaptive Gauss-Kronrod wrapper.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "blayer/error.hpp"

namespace blayer::quad {

using GaussRule = boost::math::quadrature::gauss<double, 20>;

/// 20-point Gauss-Legendre rule on [a, b].
template <class F>
double gauss_panel(F&& f, double a, double b) {
  const auto& x = GaussRule::abscissa();
  const auto& w = GaussRule::weights();
  const double c = 0.5 * (a + b);
  const double r = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = r * x[k];
    // abscissa() lists the non-negative half; 0 appears once for odd orders.
    if (x[k] == 0.0) {
      s += w[k] * f(c);
    } else {
      s += w[k] * (f(c - dx) + f(c + dx));
    }
  }
  return s * r;
}

/// Nodes and weights of the 20-point rule on [a, b], appended to the outputs.
inline void gauss_nodes(double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
  const auto& x = GaussRule::abscissa();
  const auto& w = GaussRule::weights();
  const double c = 0.5 * (a + b);
  const double r = 0.5 * (b - a);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] == 0.0) {
      nodes.push_back(c);
      weights.push_back(w[k] * r);
    } else {
      nodes.push_back(c - r * x[k]);
      weights.push_back(w[k] * r);
      nodes.push_back(c + r * x[k]);
      weights.push_back(w[k] * r);
    }
  }
}

/// Composite rule on [a, b] with panels no wider than max_width.
template <class F>
double integrate_uniform(F&& f, double a, double b, double max_width) {
  if (!(b > a)) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
  const double w = (b - a) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * w;
    const double hi = (p + 1 == panels) ? b : lo + w;
    s += gauss_panel(f, lo, hi);
  }
  return s;
}

/// Panel layout for [a, b] refined geometrically toward a (toward_left) or b.
/// Resolves integrable log or power singularities at that endpoint: the
/// innermost panel has width ratio^levels (b - a).
inline std::vector<double> graded_breaks(double a, double b, bool toward_left, int levels = 28,
                                         double ratio = 0.25) {
  std::vector<double> br;
  br.reserve(static_cast<std::size_t>(levels) + 2);
  const double len = b - a;
  if (toward_left) {
    br.push_back(a);
    for (int k = levels; k >= 1; --k) br.push_back(a + len * std::pow(ratio, k));
    br.push_back(b);
  } else {
    br.push_back(a);
    for (int k = 1; k <= levels; ++k) br.push_back(b - len * std::pow(ratio, levels + 1 - k));
    br.push_back(b);
    std::sort(br.begin(), br.end());
  }
  return br;
}

template <class F>
double integrate_graded(F&& f, double a, double b, bool toward_left = true, int levels = 28,
                        double ratio = 0.25) {
  if (!(b > a)) return 0.0;
  const auto br = graded_breaks(a, b, toward_left, levels, ratio);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) s += gauss_panel(f, br[k], br[k + 1]);
  return s;
}

/// Panel edges for [a, b]: the given breakpoints, a geometric refinement
/// around each point in `singular` (innermost panel ratio^levels * max_width),
/// and uniform subdivision so no panel is wider than max_width.
inline std::vector<double> singular_mesh(double a, double b, const std::vector<double>& breaks, double max_width,
                                         const std::vector<double>& singular = {}, int levels = 100,
                                         double ratio = 0.25) {
  std::vector<double> pts = {a, b};
  for (double x : breaks)
    if (x > a && x < b) pts.push_back(x);
  for (double s : singular) {
    if (s < a || s > b) continue;
    if (s > a) pts.push_back(s);
    double d = max_width;
    for (int k = 0; k <= levels; ++k, d *= ratio) {
      if (s - d > a && s - d < b) pts.push_back(s - d);
      if (s + d > a && s + d < b) pts.push_back(s + d);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> mesh;
  mesh.reserve(pts.size());
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double lo = pts[k], hi = pts[k + 1];
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_width)));
    for (int p = 0; p < panels; ++p) mesh.push_back(lo + (hi - lo) * p / panels);
  }
  mesh.push_back(pts.back());
  return mesh;
}

/// Integral over [a, b] of f, smooth between the given breakpoints, with
/// integrable singularities allowed at the points listed in `singular`.
template <class F>
double integrate_piecewise(F&& f, double a, double b, const std::vector<double>& breaks, double max_width,
                           const std::vector<double>& singular = {}) {
  if (!(b > a)) return 0.0;
  const auto mesh = singular_mesh(a, b, breaks, max_width, singular);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < mesh.size(); ++k) s += gauss_panel(f, mesh[k], mesh[k + 1]);
  return s;
}

/// Adaptive 31-point Gauss-Kronrod. Throws QuadratureError if the error
/// estimate exceeds max(abs_tol, rel_tol |result|).
template <class F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-14, double rel_tol = 1e-13,
                          unsigned max_depth = 30) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  double l1 = 0.0;
  const double r = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, max_depth, rel_tol, &err, &l1);
  if (!(err <= std::max(abs_tol, 10.0 * rel_tol * l1))) {
    throw QuadratureError("adaptive quadrature did not converge on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "]",
                          err);
  }
  return r;
}

}  // namespace blayer::quad
