#pragma once

// E_n(x) = (1/n^2) sum_{i>j} gamma V(gamma (x_i - x_j)) + (1/n) sum_i U(x_i)
// over 0 = x_0 < x_1 < ... < x_n, its derivatives, a Newton minimizer and
// quantile initializations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "blayer/confinement.hpp"
#include "blayer/continuum.hpp"
#include "blayer/error.hpp"
#include "blayer/grid_measure.hpp"
#include "blayer/parallel.hpp"
#include "blayer/potentials.hpp"
#include "blayer/quadrature.hpp"

namespace blayer {

struct ParticleConfiguration {
  std::vector<double> x;  // x[0] = 0, ..., x[n]
  double gamma = 1.0;

  ParticleConfiguration() = default;
  ParticleConfiguration(std::vector<double> positions, double gamma_n) : x(std::move(positions)), gamma(gamma_n) {}

  int n() const { return static_cast<int>(x.size()) - 1; }

  /// Throws unless x_0 = 0 and the positions are finite and strictly increasing.
  void validate(bool allow_ties = false) const {
    if (x.size() < 2) throw DomainError("configuration needs n >= 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("configuration needs gamma > 0");
    if (x[0] != 0.0) throw DomainError("configuration must have x_0 = 0");
    for (std::size_t i = 1; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) throw DomainError("configuration has a non-finite position");
      if (allow_ties ? x[i] < x[i - 1] : !(x[i] > x[i - 1]))
        throw DomainError("configuration is not strictly increasing at index " + std::to_string(i));
    }
  }
};

namespace detail {

inline void check_configuration(const ParticleConfiguration& cfg, const InteractionPotential& V) {
  // Bounded kernels tolerate coincident points.
  cfg.validate(!V.singular());
}

}  // namespace detail

/// E_n with a fixed-order pairwise sum.
inline double energy(const ParticleConfiguration& cfg, const InteractionPotential& V, const ConfiningPotential& U) {
  detail::check_configuration(cfg, V);
  const auto& x = cfg.x;
  const double g = cfg.gamma;
  const double n = cfg.n();
  std::vector<double> row(x.size(), 0.0);
  parallel_for(x.size(), [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < i; ++j) s += V.value(g * (x[i] - x[j]));
    row[i] = g * s / (n * n) + U.value(x[i]) / n;
  });
  double e = 0.0;
  for (double r : row) e += r;
  return e;
}

/// dE_n/dx_i for i = 1..n (x_0 is fixed).
inline std::vector<double> gradient(const ParticleConfiguration& cfg, const InteractionPotential& V,
                                    const ConfiningPotential& U) {
  detail::check_configuration(cfg, V);
  const auto& x = cfg.x;
  const double g = cfg.gamma;
  const double n = cfg.n();
  std::vector<double> out(x.size() - 1);
  parallel_for(out.size(), [&](std::size_t k) {
    const std::size_t i = k + 1;
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j == i) continue;
      const double d = x[i] - x[j];
      // V'(|d|) sign(d); a tie (bounded V only) contributes the one-sided slope pushing i up.
      s += j < i ? V.derivative(g * d) : -V.derivative(-g * d);
    }
    out[k] = g * g * s / (n * n) + U.derivative(x[i]) / n;
  });
  return out;
}

/// Hessian of E_n in (x_1, ..., x_n).
inline Eigen::MatrixXd hessian(const ParticleConfiguration& cfg, const InteractionPotential& V,
                               const ConfiningPotential& U) {
  detail::check_configuration(cfg, V);
  const auto& x = cfg.x;
  const double g = cfg.gamma;
  const double n = cfg.n();
  const double c = g * g * g / (n * n);
  const Eigen::Index m = static_cast<Eigen::Index>(x.size()) - 1;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
    const std::size_t i = k + 1;
    double diag = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j == i) continue;
      const double h = c * V.second_derivative(g * std::abs(x[i] - x[j]));
      diag += h;
      if (j > 0) H(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j - 1)) = -h;
    }
    H(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = diag + U.second_derivative(x[i]) / n;
  });
  return H;
}

struct MinimizeOptions {
  double tol = 1e-10;        // max-norm of the (projected) gradient
  int max_iterations = 10000;
  int polish_steps = 3;      // Newton steps taken after tol is met, stopping early at roundoff
  int lbfgs_memory = 10;
  bool record_trace = true;
};

struct MinimizeResult {
  ParticleConfiguration cfg;
  double energy = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int newton_steps = 0;
  int lbfgs_steps = 0;
  std::vector<double> energy_trace;    // energy after every accepted step
  std::vector<double> gradient_trace;  // projected gradient norm at every iterate
};

namespace detail {

// Max-norm of the gradient with x_1 >= 0 treated as a bound (active when x_1 = 0).
inline double projected_norm(const std::vector<double>& g, const ParticleConfiguration& cfg) {
  double m = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double v = g[k];
    if (k == 0 && cfg.x[1] == 0.0) v = std::min(v, 0.0);
    m = std::max(m, std::abs(v));
  }
  return m;
}

}  // namespace detail

/// Damped Newton with Armijo backtracking; L-BFGS direction when the Hessian
/// is not positive definite. Steps are halved until the ordering is kept.
/// For bounded V the constraint x_1 >= 0 is handled by projection.
inline MinimizeResult minimize(const ParticleConfiguration& init, const InteractionPotential& V,
                               const ConfiningPotential& U, const MinimizeOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw DomainError("minimize: tol must be positive");
  init.validate();
  const bool bounded = !V.singular();
  const std::size_t m = init.x.size() - 1;

  MinimizeResult res;
  ParticleConfiguration cur = init;
  double E = energy(cur, V, U);
  std::vector<double> g = gradient(cur, V, U);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
  int polished = 0;
  double last_step = std::numeric_limits<double>::infinity();

  auto to_eigen = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  auto trial = [&](const Eigen::VectorXd& d, double alpha) -> std::optional<ParticleConfiguration> {
    ParticleConfiguration next = cur;
    for (std::size_t k = 0; k < m; ++k) next.x[k + 1] = cur.x[k + 1] + alpha * d[static_cast<Eigen::Index>(k)];
    if (bounded) next.x[1] = std::max(0.0, next.x[1]);
    for (std::size_t i = 1; i <= m; ++i) {
      const bool ok = (bounded && i == 1) ? next.x[1] >= 0.0 : next.x[i] > next.x[i - 1];
      if (!ok || !std::isfinite(next.x[i])) return std::nullopt;
    }
    return next;
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    const double gnorm = detail::projected_norm(g, cur);
    res.gradient_trace.push_back(gnorm);
    if (gnorm <= opt.tol) {
      const double scale = 1.0 + std::abs(cur.x.back());
      if (polished >= opt.polish_steps || last_step <= 1e-15 * scale) {
        res.cfg = cur;
        res.energy = E;
        res.gradient_norm = gnorm;
        res.iterations = it;
        return res;
      }
      ++polished;
    }

    Eigen::VectorXd gv = to_eigen(g);
    const bool pinned = bounded && cur.x[1] == 0.0 && g[0] > 0.0;
    Eigen::VectorXd d;
    bool newton = false;
    {
      Eigen::MatrixXd H = hessian(cur, V, U);
      if (pinned) {
        H.row(0).setZero();
        H.col(0).setZero();
        H(0, 0) = 1.0;
        gv[0] = 0.0;
      }
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() == Eigen::Success) {
        d = -llt.solve(gv);
        newton = d.allFinite();
      }
    }
    if (!newton) {
      // L-BFGS two-loop recursion
      Eigen::VectorXd q = gv;
      std::vector<double> a(memory.size());
      for (std::size_t k = memory.size(); k-- > 0;) {
        const auto& [s, y] = memory[k];
        a[k] = s.dot(q) / y.dot(s);
        q -= a[k] * y;
      }
      double h0 = 1e-3;
      if (!memory.empty()) h0 = memory.back().first.dot(memory.back().second) / memory.back().second.squaredNorm();
      Eigen::VectorXd r = h0 * q;
      for (std::size_t k = 0; k < memory.size(); ++k) {
        const auto& [s, y] = memory[k];
        const double b = y.dot(r) / y.dot(s);
        r += s * (a[k] - b);
      }
      d = -r;
      if (pinned) d[0] = 0.0;
    }
    double slope = gv.dot(d);
    if (!(slope < 0.0)) {
      d = -gv;
      slope = -gv.squaredNorm();
      newton = false;
    }

    // Backtracking: keep the ordering, then Armijo up to roundoff in E.
    double alpha = 1.0;
    std::optional<ParticleConfiguration> next;
    double E_next = E;
    const double noise = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(E));
    for (int ls = 0; ls < 80; ++ls, alpha *= 0.5) {
      next = trial(d, alpha);
      if (!next) continue;
      E_next = energy(*next, V, U);
      // Armijo on the actual (possibly projected) displacement
      double decrease = 0.0;
      for (std::size_t k = 0; k < m; ++k) decrease += g[k] * (next->x[k + 1] - cur.x[k + 1]);
      if (E_next <= E + 1e-4 * std::min(decrease, 0.0) + noise && decrease < 0.0) break;
      next.reset();
    }
    if (!next) {
      if (gnorm <= opt.tol) {
        res.cfg = cur;
        res.energy = E;
        res.gradient_norm = gnorm;
        res.iterations = it;
        return res;
      }
      throw SolverError("minimize: line search failed", cur.x, gnorm);
    }

    std::vector<double> g_next = gradient(*next, V, U);
    Eigen::VectorXd s(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) s[static_cast<Eigen::Index>(k)] = next->x[k + 1] - cur.x[k + 1];
    const Eigen::VectorXd y = to_eigen(g_next) - to_eigen(g);
    if (s.dot(y) > 1e-300) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > opt.lbfgs_memory) memory.pop_front();
    }
    last_step = s.lpNorm<Eigen::Infinity>();
    cur = std::move(*next);
    E = E_next;
    g = std::move(g_next);
    if (newton) {
      ++res.newton_steps;
    } else {
      ++res.lbfgs_steps;
    }
    if (opt.record_trace) res.energy_trace.push_back(E);
  }
  throw SolverError("minimize: iteration cap reached", cur.x, detail::projected_norm(g, cur));
}

/// (x_i, 2 / (n (x_{i+1} - x_{i-1}))) for i = 1..n-1.
inline std::vector<std::pair<double, double>> density_crosses(const ParticleConfiguration& cfg) {
  const int n = cfg.n();
  if (n < 2) throw DomainError("density crosses need n >= 2");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n - 1));
  for (int i = 1; i < n; ++i)
    out.emplace_back(cfg.x[i], 2.0 / (n * (cfg.x[i + 1] - cfg.x[i - 1])));
  return out;
}

struct QuantileInit {
  ParticleConfiguration cfg;  // physical positions x_i = z_i / gamma
  std::vector<double> z;      // zoomed positions
  int J = -1;                 // first index of the linear tail rule, -1 if unused
};

/// Zoomed positions z_i with int_{z_{i-1}}^{z_i} (nu + rho~*) = gamma/n, where
/// rho~*(z) = rho*(z / gamma). When nu has negative total mass the positions
/// follow the quantile rule up to the first J with int_{z_J}^inf rho~* <= gamma/n
/// and continue with spacing gamma^{3/2}/n.
inline QuantileInit quantile_init(const GridMeasure& nu, const ContinuumDensity& rho, int n, double gamma) {
  if (n < 1) throw DomainError("quantile_init: n must be >= 1");
  if (!(gamma > 0.0)) throw DomainError("quantile_init: gamma must be positive");

  // f = nu + rho~* is smooth between these points.
  std::vector<double> br = {0.0};
  if (!nu.values.empty()) {
    for (std::size_t k = 0; k <= nu.cells(); ++k) br.push_back(nu.h * static_cast<double>(k));
  }
  for (double b : rho.breakpoints()) br.push_back(gamma * b);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  auto f = [&](double z) { return (nu.values.empty() ? 0.0 : nu(z)) + rho.rho(z / gamma); };
  // Check nonnegativity on cell sides and midpoints of f's smooth pieces.
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    for (double t : {0.0, 0.5, 1.0}) {
      const double z = br[k] + t * (br[k + 1] - br[k]);
      const double zz = t == 1.0 ? std::nextafter(z, br[k]) : z;
      if (f(zz) < -1e-14) throw DomainError("quantile_init: nu + rho~* is negative");
    }
  }
  // segment masses; both ends of a cell are evaluated from inside the segment
  auto seg = [&](double a, double b) {
    return quad::gauss_panel(
        [&](double z) { return f(std::clamp(z, std::nextafter(a, b), std::nextafter(b, a))); }, a, b);
  };
  std::vector<double> cum(br.size(), 0.0);
  for (std::size_t k = 1; k < br.size(); ++k) {
    double s = 0.0;
    const double a = br[k - 1], b = br[k];
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.5)));
    for (int p = 0; p < panels; ++p) s += seg(a + (b - a) * p / panels, p + 1 == panels ? b : a + (b - a) * (p + 1) / panels);
    cum[k] = cum[k - 1] + s;
  }
  const double total = cum.back();
  auto invert = [&](double target) {
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    std::size_t k = static_cast<std::size_t>(it - cum.begin());
    if (k == 0) return br.front();
    if (k >= cum.size()) return br.back();
    const double a = br[k - 1], b = br[k];
    auto F = [&](double z) {
      double s = cum[k - 1];
      const int panels = std::max(1, static_cast<int>(std::ceil((z - a) / 0.5)));
      for (int p = 0; p < panels; ++p)
        s += z > a ? quad::gauss_panel([&](double t) { return f(std::clamp(t, std::nextafter(a, b), std::nextafter(b, a))); },
                                       a + (z - a) * p / panels, a + (z - a) * (p + 1) / panels)
                   : 0.0;
      return s - target;
    };
    const double Fa = cum[k - 1] - target, Fb = cum[k] - target;
    if (Fb == 0.0) return b;
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(F, a, b, Fa, Fb, boost::math::tools::eps_tolerance<double>(53),
                                                     iters);
    return 0.5 * (r.first + r.second);
  };

  QuantileInit out;
  out.z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  const double q = gamma / n;
  const bool deficit = total < gamma * (1.0 - 1e-14);
  int J = n;
  for (int i = 1; i <= n; ++i) {
    const double target = q * i;
    if (target > total * (1.0 + 1e-14)) {
      J = i - 1;
      break;
    }
    out.z[i] = invert(std::min(target, total));
    if (deficit) {
      const double x = std::min(out.z[i] / gamma, rho.support_end());
      const double beyond = gamma * quad::integrate_piecewise([&](double t) { return rho.rho(t); }, x,
                                                              rho.support_end(), rho.breakpoints(), 0.125, {});
      if (beyond <= q) {
        J = i;
        break;
      }
    }
  }
  if (J < n) {
    out.J = J;
    const double step = std::pow(gamma, 1.5) / n;
    for (int i = J + 1; i <= n; ++i) out.z[i] = out.z[J] + (i - J) * step;
  }
  std::vector<double> x(out.z.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = out.z[i] / gamma;
  x[0] = 0.0;
  out.cfg = ParticleConfiguration(std::move(x), gamma);
  return out;
}

/// Bulk-only initialization (nu = 0).
inline ParticleConfiguration default_init(const ContinuumDensity& rho, int n, double gamma) {
  return quantile_init(GridMeasure(), rho, n, gamma).cfg;
}

}  // namespace blayer
