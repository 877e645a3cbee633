#pragma once

// Discrete boundary-layer measures nu_n, the five-term form of
// F_n = gamma (E_n - E^gamma(rho*)), a vague-topology distance and gamma sweeps.

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "blayer/boundary_layer.hpp"
#include "blayer/continuum.hpp"
#include "blayer/discrete_energy.hpp"
#include "blayer/error.hpp"
#include "blayer/io.hpp"
#include "blayer/parallel.hpp"
#include "blayer/potentials.hpp"
#include "blayer/quadrature.hpp"

namespace blayer {

/// Compactly supported Lipschitz test function on [center - w, center + w]:
/// a hat, or the bump exp(1 - 1/(1 - r^2)) with r = (x - center)/w.
struct TestFunction {
  enum class Kind { Hat, Bump };
  Kind kind = Kind::Hat;
  double center = 0.0;
  double half_width = 1.0;

  double operator()(double x) const {
    const double r = (x - center) / half_width;
    if (std::abs(r) >= 1.0) return 0.0;
    if (kind == Kind::Hat) return 1.0 - std::abs(r);
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
  }
  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
};

/// The fixed panel: 8 (center, half-width) pairs on [0, M], each as hat and bump.
inline std::vector<TestFunction> vague_panel(double M) {
  if (!(M > 0.0)) throw DomainError("vague panel needs M > 0");
  const double cw[8][2] = {{0, 1.0 / 8}, {0.5, 0.5}, {0.25, 0.25}, {0.75, 0.25},
                           {1.0 / 8, 1.0 / 8}, {3.0 / 8, 1.0 / 8}, {5.0 / 8, 1.0 / 8}, {7.0 / 8, 1.0 / 8}};
  std::vector<TestFunction> out;
  for (auto kind : {TestFunction::Kind::Hat, TestFunction::Kind::Bump})
    for (const auto& p : cw) out.push_back({kind, p[0] * M, p[1] * M});
  return out;
}

/// Atoms of equal weight plus a density on [0, inf) that is smooth between breakpoints.
struct SignedMeasure {
  std::vector<double> atoms;
  double atom_weight = 0.0;
  std::function<double(double)> density;  // may be empty
  std::vector<double> density_breaks;
  double density_end = std::numeric_limits<double>::infinity();  // density vanishes beyond

  double total_atom_mass() const { return atom_weight * static_cast<double>(atoms.size()); }

  /// int phi d(measure): exact on atoms, Gauss panels for the density.
  double pair(const TestFunction& phi) const {
    double s = 0.0;
    for (double z : atoms) s += atom_weight * phi(z);
    if (density) {
      const double a = std::max(0.0, phi.lo()), b = std::min(phi.hi(), density_end);
      if (b > a) {
        std::vector<double> br;
        for (double x : density_breaks)
          if (x > a && x < b) br.push_back(x);
        if (phi.kind == TestFunction::Kind::Hat) br.push_back(phi.center);
        const double width = std::min(0.25, phi.half_width / 16.0);
        s += quad::integrate_piecewise([&](double x) { return phi(x) * density(x); }, a, b, br, width);
      }
    }
    return s;
  }
};

/// nu_n = (gamma/n) sum delta_{gamma x_i} - rho*(. / gamma), in zoomed coordinates.
inline SignedMeasure to_nu_n(const ParticleConfiguration& cfg, const ContinuumDensity& rho) {
  cfg.validate(true);
  SignedMeasure m;
  const double g = cfg.gamma;
  for (double x : cfg.x) m.atoms.push_back(g * x);
  m.atom_weight = g / cfg.n();
  m.density = [rho, g](double z) { return -rho.rho(z / g); };
  for (double b : rho.breakpoints()) m.density_breaks.push_back(g * b);
  m.density_end = g * rho.support_end();
  return m;
}

/// A grid density as a measure (cells are the breakpoints).
inline SignedMeasure from_grid(const GridMeasure& nu) {
  SignedMeasure m;
  m.density = [nu](double z) { return nu(z); };
  for (std::size_t k = 0; k <= nu.cells(); ++k) m.density_breaks.push_back(nu.h * static_cast<double>(k));
  m.density_end = nu.L;
  return m;
}

/// max over the test-function panel on [0, M] of |<phi, a> - <phi, b>|.
inline double vague_distance(const SignedMeasure& a, const SignedMeasure& b, double M = 20.0) {
  double d = 0.0;
  for (const auto& phi : vague_panel(M)) d = std::max(d, std::abs(a.pair(phi) - b.pair(phi)));
  return d;
}

/// int V(s) [rho_bar(x - s/gamma) + rho_bar(x + s/gamma) - 2 rho_bar(x)] ds over s > 0,
/// i.e. ((V_gamma - delta_0) * rho_bar)(x) for unit-mass V.
inline double smoothing_error(const InteractionPotential& V, const ContinuumDensity& rho, double gamma, double x) {
  std::vector<double> breaks = rho.breakpoints();
  breaks.push_back(0.0);
  const double f0 = rho.rho_bar(x);
  const double cut = V.cutoff();
  std::vector<double> sb;
  for (double b : breaks) {
    const double s = gamma * std::abs(x - b);
    if (s > 0.0 && s < cut) sb.push_back(s);
  }
  auto integrand = [&](double s) {
    return V.value(s) * (rho.rho_bar(x - s / gamma) + rho.rho_bar(x + s / gamma) - 2.0 * f0);
  };
  return quad::integrate_piecewise(integrand, 0.0, cut, sb, 0.5, {0.0});
}

/// Configuration-independent pieces of F_n for one (rho*, V, gamma).
struct ContinuumReference {
  double gamma = 0.0;
  double E_gamma = 0.0;          // spectral route (cross-checked against the direct route)
  double half_interaction = 0.0; // 1/2 int int V_gamma rho* rho*, direct route
  double g_pairing = 0.0;        // int g(gamma x) rho*(x) dx
  double u_pairing = 0.0;        // int smoothing_error(x) rho*(x) dx
};

inline ContinuumReference continuum_reference(const ContinuumDensity& rho, const InteractionPotential& V,
                                              double gamma) {
  ContinuumReference r;
  r.gamma = gamma;
  r.E_gamma = energy_Egamma(rho, V, gamma);
  r.half_interaction = interaction_direct(rho, V, gamma);
  r.g_pairing = rho.integrate([&](double x) { return V.tail(gamma * x); }, {}, {0.0});
  // smoothing_error has log-type second derivatives at the kinks of rho_bar
  std::vector<double> xs, ws;
  const auto br = rho.breakpoints();
  for (const auto& I : rho.support()) {
    const auto mesh = quad::singular_mesh(I.lo, I.hi, br, 0.125, br, 40);
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k) quad::gauss_nodes(mesh[k], mesh[k + 1], xs, ws);
  }
  std::vector<double> vals(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { vals[i] = ws[i] * rho.rho(xs[i]) * smoothing_error(V, rho, gamma, xs[i]); });
  for (double v : vals) r.u_pairing += v;
  return r;
}

struct FnTerms {
  double T1 = 0.0;  // diagonal-free interaction of nu_n
  double T2 = 0.0;  // barrier term -rho*(0) int g dnu_n
  double T3 = 0.0;  // smoothing error
  double T4 = 0.0;  // off-support confinement
  double T5 = 0.0;  // C_U gamma / n
  double sum = 0.0;
  double direct = 0.0;  // gamma (E_n - E^gamma(rho*))
  double E_n = 0.0;
  double E_gamma = 0.0;
};

/// The five terms of F_n for cfg, checked against gamma (E_n - E^gamma) to rel_tol.
inline FnTerms Fn_terms(const ParticleConfiguration& cfg, const InteractionPotential& V, const ContinuumDensity& rho,
                        const ContinuumReference& ref, double rel_tol = 1e-8) {
  cfg.validate(!V.singular());
  const double g = cfg.gamma;
  if (std::abs(ref.gamma - g) > 1e-15 * g) throw DomainError("Fn_terms: reference built for another gamma");
  const int n = cfg.n();
  const auto& U = rho.confinement();
  const auto& x = cfg.x;

  struct PerAtom {
    double pairs, conv, tail, smooth, off;
  };
  std::vector<PerAtom> at(x.size());
  parallel_for(x.size(), [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (j != i) s += V.value(g * std::abs(x[i] - x[j]));
    at[i].pairs = g * s;
    at[i].conv = convolve_rho(rho, V, g, x[i]);
    at[i].tail = V.tail(g * x[i]);
    at[i].smooth = smoothing_error(V, rho, g, x[i]);
    at[i].off = rho.in_support(x[i]) ? 0.0 : U.value(x[i]) - rho.C_U();
  });
  double pairs = 0.0, conv = 0.0, tail = 0.0, smooth = 0.0, off = 0.0;
  for (const auto& a : at) {
    pairs += a.pairs;
    conv += a.conv;
    tail += a.tail;
    smooth += a.smooth;
    off += a.off;
  }
  const double dn = n;
  FnTerms t;
  t.T1 = g * (0.5 * pairs / (dn * dn) - conv / dn + ref.half_interaction);
  t.T2 = -rho.rho0() * g * (tail / dn - ref.g_pairing);
  t.T3 = g * (smooth / dn - ref.u_pairing);
  t.T4 = g * off / dn;
  t.T5 = rho.C_U() * g / dn;
  t.sum = t.T1 + t.T2 + t.T3 + t.T4 + t.T5;
  t.E_n = energy(cfg, V, U);
  t.E_gamma = ref.E_gamma;
  t.direct = g * (t.E_n - t.E_gamma);
  if (std::abs(t.sum - t.direct) > rel_tol * std::max(std::abs(t.direct), 1e-300))
    throw ConsistencyError("Fn_terms: five-term sum " + io::fmt(t.sum) + " vs direct " + io::fmt(t.direct),
                           t.sum, t.direct);
  return t;
}

inline FnTerms Fn_terms(const ParticleConfiguration& cfg, const InteractionPotential& V, const ContinuumDensity& rho,
                        double rel_tol = 1e-8) {
  return Fn_terms(cfg, V, rho, continuum_reference(rho, V, cfg.gamma), rel_tol);
}

/// -rho*(0) int_{-inf}^0 (V * nu_n)(y) dy evaluated on the left half-line
/// (the other side of the identity used by T2).
inline double barrier_term_direct(const ParticleConfiguration& cfg, const InteractionPotential& V,
                                  const ContinuumDensity& rho) {
  const double g = cfg.gamma;
  const double w = g / cfg.n();
  const double zend = g * rho.support_end();
  std::vector<double> zb;
  for (double b : rho.breakpoints()) zb.push_back(g * b);
  auto conv = [&](double y) {  // (V * nu_n)(y) for y < 0
    double s = 0.0;
    for (double xi : cfg.x) s += w * V.value(g * xi - y);
    auto f = [&](double z) { return V.value(z - y) * rho.rho(z / g); };
    return s - quad::integrate_piecewise(f, 0.0, zend, zb, 0.5, {0.0});
  };
  const double cut = V.cutoff();
  const double inner = quad::integrate_piecewise([&](double t) { return conv(-t); }, 0.0, cut, {}, 0.5, {0.0});
  return -rho.rho0() * inner;
}

/// gamma_n = c n^p, or c sqrt(n / log n).
struct GammaRule {
  enum class Kind { Power, SqrtNLogN };
  Kind kind = Kind::Power;
  double c = 1.0;
  double p = 0.25;

  double operator()(int n) const {
    if (kind == Kind::Power) return c * std::pow(static_cast<double>(n), p);
    return c * std::sqrt(n / std::log(static_cast<double>(n)));
  }

  /// 1 << gamma_n << n^{(1-a)/(2-a)} (a > 0) or sqrt(n / log n) (a = 0).
  bool in_regime(double a) const {
    if (kind == Kind::SqrtNLogN) return false;  // the boundary itself
    if (!(p > 0.0)) return false;
    return a == 0.0 ? p < 0.5 : p < (1.0 - a) / (2.0 - a);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    if (kind == Kind::SqrtNLogN) {
      os << c << "*sqrt(n/log(n))";
    } else {
      os << c << "*n^" << p;
    }
    return os.str();
  }
};

struct SweepRow {
  int n = 0;
  double gamma = 0.0;
  std::string rule;
  bool in_regime = false;
  bool ok = false;
  std::string error;
  double E_n = 0.0;
  double E_gamma = 0.0;
  double gap = 0.0;     // gamma (E_n - E^gamma)
  double F_n = 0.0;     // five-term sum
  double F_star = 0.0;  // F(nu*)
  double dist = 0.0;    // vague distance(nu_n, nu*)
  FnTerms terms;
  double grad_norm = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  ParticleConfiguration cfg;
};

struct SweepEntry {
  int n = 0;
  GammaRule rule;
};

struct SweepOptions {
  BoundaryLayerGrid grid;
  double window = 20.0;
  MinimizeOptions minimize;
  MinimizeFOptions layer;
  std::function<void(const SweepRow&)> on_row;  // called as each row completes
};

/// Minimizes E_n for each entry and compares with the continuum boundary layer.
/// A failing row is recorded with its error and the sweep continues.
inline std::vector<SweepRow> gamma_sweep(const std::vector<SweepEntry>& plan, PotentialPtr V, ConfinementPtr U,
                                         const SweepOptions& opt = {}) {
  const auto rho = solve_continuum(U);
  const auto layer = minimize_F(V, rho.rho0(), opt.grid, opt.layer);
  const auto nu_star = from_grid(layer.nu_star);
  std::vector<SweepRow> rows;
  for (const auto& e : plan) {
    SweepRow row;
    row.n = e.n;
    row.gamma = e.rule(e.n);
    row.rule = e.rule.describe();
    row.in_regime = e.rule.in_regime(V->singularity_exponent());
    row.F_star = layer.F_value;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto res = minimize(default_init(rho, e.n, row.gamma), *V, *U, opt.minimize);
      row.cfg = res.cfg;
      row.grad_norm = res.gradient_norm;
      row.iterations = res.iterations;
      row.terms = Fn_terms(res.cfg, *V, rho);
      row.E_n = row.terms.E_n;
      row.E_gamma = row.terms.E_gamma;
      row.gap = row.terms.direct;
      row.F_n = row.terms.sum;
      row.dist = vague_distance(to_nu_n(res.cfg, rho), nu_star, opt.window);
      row.ok = true;
    } catch (const Error& err) {
      row.error = err.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
    if (opt.on_row) opt.on_row(rows.back());
  }
  return rows;
}

}  // namespace blayer
