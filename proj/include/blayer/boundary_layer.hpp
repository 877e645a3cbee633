#pragma once

// Boundary-layer functional F(nu) = 1/2 int int V(x - y) nu(x) nu(y) - rho0 int g nu
// for nu piecewise constant on K cells of [0, L], and its minimization over
// nu >= -rho0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <vector>

#include "blayer/continuum.hpp"
#include "blayer/error.hpp"
#include "blayer/grid_measure.hpp"
#include "blayer/parallel.hpp"
#include "blayer/potentials.hpp"
#include "blayer/quadrature.hpp"
#include "blayer/spectral.hpp"

namespace blayer {

struct BoundaryLayerGrid {
  double L = 40.0;
  std::size_t K = 4096;
};

/// The Gram matrix A_kl = int_{cell k} int_{cell l} V(x - y) dx dy of the cell
/// indicators, applied through its Fourier symbol on a zero-padded circulant
/// of length N >= 2K. The Toeplitz entries are also available from real-space
/// quadrature for the dense cross-check.
class CellOperator {
 public:
  CellOperator(PotentialPtr V, double L, std::size_t K) : V_(std::move(V)), L_(L), K_(K) {
    if (!V_) throw DomainError("cell operator: null kernel");
    if (!(L > 0.0) || K < 2) throw DomainError("cell operator needs L > 0 and K >= 2");
    h_ = L / static_cast<double>(K);
    N_ = 2;
    while (N_ < 2 * K) N_ *= 2;
    fft_ = std::make_unique<RealFFT>(N_);
    eig_.resize(N_ / 2 + 1);
    if (V_->closed_form_fourier()) {
      parallel_for(eig_.size(), [&](std::size_t j) { eig_[j] = symbol(static_cast<double>(j) / (N_ * h_)) / h_; });
    } else {
      // DFT of the circulant embedding of the real-space Toeplitz entries
      const auto& a = toeplitz();
      std::vector<double> c(N_, 0.0);
      for (std::size_t m = 0; m < K_; ++m) {
        c[m] = a[m];
        if (m > 0) c[N_ - m] = a[m];
      }
      const auto y = fft_->forward(c);
      for (std::size_t j = 0; j < eig_.size(); ++j) eig_[j] = y[j].real();
    }
    for (double e : eig_)
      if (!(e > 0.0)) throw DomainError("cell operator: non-positive symbol; kernel transform must be positive");
  }

  const InteractionPotential& kernel() const { return *V_; }
  PotentialPtr kernel_ptr() const { return V_; }
  double L() const { return L_; }
  double h() const { return h_; }
  std::size_t K() const { return K_; }
  std::size_t N() const { return N_; }
  /// Eigenvalues of the circulant at frequencies j / (N h), j = 0..N/2.
  const std::vector<double>& eigenvalues() const { return eig_; }

  /// S(w) = sum_m v(w + m/h) |1_cell^(w + m/h)|^2, the symbol of A at frequency w.
  double symbol(double w) const {
    const double pi = std::numbers::pi;
    const double s = std::sin(pi * w * h_);
    const double t = pi * w * h_;
    const double sinc = t == 0.0 ? 1.0 : s / t;
    double sum = 0.0;
    for (int m = 1; m <= kAliases; ++m) {
      const double xp = w + m / h_, xm = w - m / h_;
      sum += V_->fourier(xp) / (xp * xp) + V_->fourier(xm) / (xm * xm);
    }
    sum += alias_tail(w, +1) + alias_tail(w, -1);
    return h_ * h_ * sinc * sinc * V_->fourier(w) + s * s / (pi * pi) * sum;
  }

  /// A nu through the circulant (nu has K entries).
  std::vector<double> apply(const std::vector<double>& nu) const { return multiply(nu, false); }
  /// Spectral preconditioner: the inverse circulant restricted to the K cells.
  std::vector<double> apply_inverse(const std::vector<double>& r) const { return multiply(r, true); }

  /// nu^T A nu from the Fourier side, sum_j lambda_j |nu^_j|^2 / N.
  double quadratic(const std::vector<double>& nu) const {
    const auto y = fft_->forward(check(nu));
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += weight(j) * eig_[j] * std::norm(y[j]);
    return s / static_cast<double>(N_);
  }

  /// The same form as || sqrt(lambda) nu^ ||^2 / N.
  double quadratic_sqrt(const std::vector<double>& nu) const {
    const auto y = fft_->forward(check(nu));
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double t = std::sqrt(eig_[j]) * std::abs(y[j]);
      s += weight(j) * t * t;
    }
    return s / static_cast<double>(N_);
  }

  /// a(m) = int V(u) (h - |u - m h|)^+ du, m = 0..K-1, by real-space quadrature.
  const std::vector<double>& toeplitz() const {
    std::call_once(toeplitz_once_, [&] {
      toeplitz_.assign(K_, 0.0);
      parallel_for(K_, [&](std::size_t m) {
        const double c = m * h_;
        auto f = [&](double u) { return V_->value(u) * (h_ - std::abs(u - c)); };
        if (m == 0) {
          toeplitz_[0] = 2.0 * quad::integrate_piecewise(f, 0.0, h_, {}, 0.25 * h_, {0.0});
        } else {
          const double lo = c - h_;
          toeplitz_[m] = quad::integrate_piecewise(f, lo, c + h_, {c}, 0.25 * h_,
                                                   lo == 0.0 ? std::vector<double>{0.0} : std::vector<double>{});
        }
      });
    });
    return toeplitz_;
  }

  /// nu^T A nu as a dense double sum over the real-space Toeplitz entries.
  double quadratic_dense(const std::vector<double>& nu) const {
    check(nu);
    const auto& a = toeplitz();
    std::vector<double> row(K_, 0.0);
    parallel_for(K_, [&](std::size_t k) {
      double s = 0.0;
      for (std::size_t l = 0; l < K_; ++l) s += a[k > l ? k - l : l - k] * nu[l];
      row[k] = nu[k] * s;
    });
    double s = 0.0;
    for (double r : row) s += r;
    return s;
  }

  /// G_k = int_{cell k} g with g(x) = int_x^inf V.
  const std::vector<double>& cell_forces() const {
    std::call_once(forces_once_, [&] {
      std::vector<double> moment(K_ + 1);
      parallel_for(K_ + 1, [&](std::size_t k) { moment[k] = V_->tail_moment(k * h_); });
      forces_.resize(K_);
      for (std::size_t k = 0; k < K_; ++k) forces_[k] = moment[k] - moment[k + 1];
    });
    return forces_;
  }

 private:
  static constexpr int kAliases = 256;

  // Aliases |m| > kAliases: power-law fit of v between |m| = kAliases/2 and
  // kAliases, summed by the midpoint rule.
  double alias_tail(double w, int side) const {
    auto xi = [&](double m) { return std::abs(w + side * m / h_); };
    const double xa = xi(kAliases / 2), xb = xi(kAliases);
    const double va = V_->fourier(xa), vb = V_->fourier(xb);
    if (!(va > 0.0 && vb > 0.0)) return 0.0;
    const double p = std::log(va / vb) / std::log(xb / xa);
    if (!(p > 0.0 && p < 4.0)) return 0.0;
    const double xs = xi(kAliases + 0.5);
    return vb * std::pow(xb, p) * h_ * std::pow(xs, -(p + 1.0)) / (p + 1.0);
  }

  double weight(std::size_t j) const { return (j == 0 || 2 * j == N_) ? 1.0 : 2.0; }

  const std::vector<double>& check(const std::vector<double>& nu) const {
    if (nu.size() != K_) throw DomainError("cell operator: vector has the wrong length");
    return nu;
  }

  std::vector<double> multiply(const std::vector<double>& nu, bool inverse) const {
    auto y = fft_->forward(check(nu));
    for (std::size_t j = 0; j < y.size(); ++j) y[j] *= inverse ? 1.0 / eig_[j] : eig_[j];
    auto z = fft_->inverse(y);
    z.resize(K_);
    for (double& v : z) v /= static_cast<double>(N_);
    return z;
  }

  PotentialPtr V_;
  double L_;
  std::size_t K_;
  double h_;
  std::size_t N_;
  std::unique_ptr<RealFFT> fft_;
  std::vector<double> eig_;
  mutable std::once_flag toeplitz_once_;
  mutable std::vector<double> toeplitz_;
  mutable std::once_flag forces_once_;
  mutable std::vector<double> forces_;
};

namespace detail {

inline void check_admissible(const GridMeasure& nu) {
  if (nu.values.size() < 2) throw DomainError("grid measure needs at least two cells");
  if (!nu.admissible(1e-12 * (1.0 + std::abs(nu.floor))))
    throw DomainError("grid measure is not admissible (values below -rho*(0) or non-finite)");
}

inline double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace detail

/// 1/2 int int V(x - y) nu(x) nu(y), spectral route, checked against the dense route.
inline double F_quadratic_form(const GridMeasure& nu, const CellOperator& A, double cross_tol = 1e-4) {
  detail::check_admissible(nu);
  if (nu.cells() != A.K() || std::abs(nu.h - A.h()) > 1e-14 * A.h())
    throw DomainError("grid measure does not match the cell operator");
  const double spectral = 0.5 * A.quadratic(nu.values);
  const double dense = 0.5 * A.quadratic_dense(nu.values);
  if (detail::relative_gap(spectral, dense) > cross_tol && std::abs(spectral - dense) > 1e-300)
    throw ConsistencyError("quadratic form: spectral and dense routes disagree", spectral, dense);
  return spectral;
}

inline double F_quadratic_form(const GridMeasure& nu, PotentialPtr V, double cross_tol = 1e-4) {
  return F_quadratic_form(nu, CellOperator(std::move(V), nu.L, nu.cells()), cross_tol);
}

/// F(nu) = 1/2 nu^T A nu - rho0 sum_k G_k nu_k.
inline double F_value(const GridMeasure& nu, const CellOperator& A, double rho0, double cross_tol = 1e-4) {
  if (!(rho0 >= 0.0)) throw DomainError("F: rho0 must be >= 0");
  const double q = F_quadratic_form(nu, A, cross_tol);
  const auto& G = A.cell_forces();
  double lin = 0.0;
  for (std::size_t k = 0; k < G.size(); ++k) lin += G[k] * nu.values[k];
  return q - rho0 * lin;
}

inline double F_value(const GridMeasure& nu, PotentialPtr V, double rho0, double cross_tol = 1e-4) {
  return F_value(nu, CellOperator(std::move(V), nu.L, nu.cells()), rho0, cross_tol);
}

struct BoundaryLayerProfile {
  GridMeasure nu_star;
  double rho0 = 0.0;
  double F_value = 0.0;        // spectral route
  double F_dense = 0.0;        // dense route
  double kkt_residual = 0.0;   // max over cells of the projected (V * nu - rho0 g) cell average
  int iterations = 0;
  int cg_iterations = 0;
  std::size_t active_cells = 0;

  /// nu* + rho*(0) in zoomed coordinates.
  double rho_tilde(double z) const { return nu_star(z) + rho0; }
};

struct MinimizeFOptions {
  double tol = 1e-8;
  int max_iterations = 2000;
  int max_cg = 4000;
  double contamination = 1e-6;  // |nu(last cell)| / max |nu| allowed
  std::optional<std::vector<double>> start;
};

struct ObstacleSolution {
  std::vector<double> x;
  std::vector<double> Ax;
  double kkt_residual = 0.0;
  int iterations = 0;
  int cg_iterations = 0;
};

namespace detail {

/// min 1/2 x^T A x - b^T x subject to x >= floor: alternating projected-gradient
/// steps (to identify the contact set) and preconditioned conjugate gradients
/// on the free cells, until the projected gradient divided by h is <= tol.
inline ObstacleSolution solve_obstacle(const CellOperator& A, const std::vector<double>& b, double floor,
                                       const MinimizeFOptions& opt) {
  const std::size_t K = A.K();
  const double h = A.h();
  std::vector<double> x(K, 0.0);
  if (opt.start) {
    if (opt.start->size() != K) throw DomainError("minimize_F: start has the wrong length");
    x = *opt.start;
  }
  for (double& v : x) v = std::max(v, floor);

  auto dot = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
    return s;
  };
  auto objective = [&](const std::vector<double>& v, const std::vector<double>& Av) {
    return 0.5 * dot(v, Av) - dot(b, v);
  };
  auto kkt = [&](const std::vector<double>& v, const std::vector<double>& g) {
    double r = 0.0;
    for (std::size_t k = 0; k < K; ++k) r = std::max(r, v[k] > floor ? std::abs(g[k]) : std::max(0.0, -g[k]));
    return r / h;
  };

  ObstacleSolution out;
  std::vector<double> Ax = A.apply(x), g(K);
  auto refresh = [&] {
    for (std::size_t k = 0; k < K; ++k) g[k] = Ax[k] - b[k];
  };
  refresh();

  int it = 0;
  double res = kkt(x, g);
  for (; it < opt.max_iterations && res > opt.tol; ++it) {
    // Projected gradient: Cauchy step along the feasible part of -g, then backtracking.
    for (int gp = 0; gp < 5; ++gp) {
      std::vector<double> d(K);
      for (std::size_t k = 0; k < K; ++k) d[k] = (x[k] > floor || g[k] < 0.0) ? -g[k] : 0.0;
      const double dd = dot(d, d);
      if (dd == 0.0) break;
      const auto Ad = A.apply(d);
      double alpha = dd / dot(d, Ad);
      const double q0 = objective(x, Ax);
      std::size_t changed = 0;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        std::vector<double> xn(K);
        double lin = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          xn[k] = std::max(floor, x[k] + alpha * d[k]);
          lin += g[k] * (xn[k] - x[k]);
        }
        auto Axn = A.apply(xn);
        if (objective(xn, Axn) <= q0 + 1e-4 * lin) {
          for (std::size_t k = 0; k < K; ++k) changed += (x[k] > floor) != (xn[k] > floor);
          x = std::move(xn);
          Ax = std::move(Axn);
          break;
        }
      }
      refresh();
      if (changed == 0) break;
    }

    // Preconditioned CG on the free cells.
    std::vector<char> free(K);
    for (std::size_t k = 0; k < K; ++k) free[k] = x[k] > floor;
    auto mask = [&](std::vector<double>& v) {
      for (std::size_t k = 0; k < K; ++k)
        if (!free[k]) v[k] = 0.0;
    };
    std::vector<double> r(K), d(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) r[k] = free[k] ? -g[k] : 0.0;
    auto z = A.apply_inverse(r);
    mask(z);
    auto p = z;
    double rz = dot(r, z);
    for (int cg = 0; cg < opt.max_cg && rz > 0.0; ++cg, ++out.cg_iterations) {
      double rmax = 0.0;
      for (double v : r) rmax = std::max(rmax, std::abs(v));
      if (rmax <= 0.05 * opt.tol * h) break;
      auto Ap = A.apply(p);
      mask(Ap);
      const double alpha = rz / dot(p, Ap);
      // largest feasible step along p
      double amax = alpha;
      for (std::size_t k = 0; k < K; ++k)
        if (p[k] < 0.0) amax = std::min(amax, (floor - x[k] - d[k]) / p[k]);
      if (amax < alpha) {
        for (std::size_t k = 0; k < K; ++k) d[k] += amax * p[k];
        break;
      }
      for (std::size_t k = 0; k < K; ++k) {
        d[k] += alpha * p[k];
        r[k] -= alpha * Ap[k];
      }
      z = A.apply_inverse(r);
      mask(z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < K; ++k) p[k] = z[k] + beta * p[k];
    }
    for (std::size_t k = 0; k < K; ++k) x[k] = std::max(floor, x[k] + d[k]);
    Ax = A.apply(x);
    refresh();
    res = kkt(x, g);
  }
  if (res > opt.tol) throw SolverError("minimize_F: iteration cap reached", x, res);
  out.x = std::move(x);
  out.Ax = std::move(Ax);
  out.kkt_residual = res;
  out.iterations = it;
  return out;
}

}  // namespace detail

/// Minimizes F over nu >= -rho0 and checks the result against the dense route
/// and for contamination from the far end of the grid.
inline BoundaryLayerProfile minimize_F(const CellOperator& A, double rho0, const MinimizeFOptions& opt = {}) {
  if (!(rho0 >= 0.0) || !std::isfinite(rho0)) throw DomainError("minimize_F: rho0 must be finite and >= 0");
  if (!(opt.tol > 0.0)) throw DomainError("minimize_F: tol must be positive");
  const std::size_t K = A.K();
  const double floor = -rho0;
  const auto& G = A.cell_forces();
  std::vector<double> b(K);
  for (std::size_t k = 0; k < K; ++k) b[k] = rho0 * G[k];
  auto sol = detail::solve_obstacle(A, b, floor, opt);
  const auto& x = sol.x;

  double vmax = 0.0;
  for (double v : x) vmax = std::max(vmax, std::abs(v));
  if (vmax > 0.0 && std::abs(x.back()) > opt.contamination * vmax)
    throw SolverError("minimize_F: boundary contamination at x = L; increase L", x, std::abs(x.back()) / vmax);

  double lin = 0.0, quad = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    lin += b[k] * x[k];
    quad += x[k] * sol.Ax[k];
  }
  BoundaryLayerProfile out;
  out.nu_star = GridMeasure(A.L(), K, floor);
  out.nu_star.values = x;
  out.rho0 = rho0;
  out.F_value = 0.5 * quad - lin;
  out.F_dense = 0.5 * A.quadratic_dense(x) - lin;
  out.kkt_residual = sol.kkt_residual;
  out.iterations = sol.iterations;
  out.cg_iterations = sol.cg_iterations;
  out.active_cells = static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [&](double v) { return v <= floor; }));
  if (detail::relative_gap(out.F_value, out.F_dense) > 1e-4 && std::abs(out.F_value - out.F_dense) > 1e-300)
    throw ConsistencyError("minimize_F: spectral and dense F disagree", out.F_value, out.F_dense);
  return out;
}

inline BoundaryLayerProfile minimize_F(PotentialPtr V, double rho0, const BoundaryLayerGrid& grid = {},
                                       const MinimizeFOptions& opt = {}) {
  return minimize_F(CellOperator(std::move(V), grid.L, grid.K), rho0, opt);
}

/// x -> nu*(gamma x) + rho*(x).
inline std::function<double(double)> profile_rho_star_gamma(const GridMeasure& nu_star, const ContinuumDensity& rho,
                                                            double gamma) {
  if (!(gamma > 0.0)) throw DomainError("profile: gamma must be positive");
  return [nu_star, rho, gamma](double x) { return nu_star(gamma * x) + rho.rho(x); };
}

}  // namespace blayer
