// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "blayer/diagnostics.hpp"
#include "oracles.hpp"

using namespace blayer;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = s < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("criterion %2d %s: %s [%s; %.2f s of %.0f s]\n", id, pass ? "PASS" : "FAIL", title.c_str(),
              o.detail.c_str(), s, limit_s);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

const double kRoot2 = std::sqrt(2.0);

}  // namespace

int main() {
  const auto wall = make_wall_potential();
  const auto linear = make_confinement("linear:1");

  report(1, "kernel ground truth", 1.0, [&] {
    const WallPotential V;
    const double quad_mass = 2.0 * V.tail(0.0) / V.normalization();
    const double series = oracle::wall_raw_mass_series();
    const double target = oracle::kPi * oracle::kPi / 3.0;
    const double e1 = std::abs(quad_mass - target), e2 = std::abs(quad_mass - series);
    const double v0 = V.fourier(0.0);
    return Outcome{e1 <= 1e-8 && e2 <= 1e-8 && std::abs(v0 - 1.0) <= 1e-10,
                   "|mass - pi^2/3| = " + fmt(e1) + ", |mass - series| = " + fmt(e2) + ", |v(0) - 1| = " +
                       fmt(std::abs(v0 - 1.0))};
  });

  report(2, "Fourier consistency", 10.0, [&] {
    auto f = [&](double x) { return wall->value(x); };
    double worst = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double w = -10.0 + 0.2 * k;
      worst = std::max(worst, std::abs(wall->fourier(w) - oracle::cosine_transform(f, w)));
    }
    return Outcome{worst <= 1e-6, "max |v - cosine quadrature| over 101 points = " + fmt(worst)};
  });

  report(3, "Fourier lower bound", 5.0, [&] {
    double c = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 100000; ++k) {
      const double w = 100.0 * k / 100000;
      c = std::min(c, wall->fourier(w) / std::min(1.0, 1.0 / (w * w)));
    }
    return Outcome{c >= 0.01, "c = " + fmt(c)};
  });

  report(4, "regularized kernel bounds", 10.0, [&] {
    std::mt19937_64 rng(4);
    bool pointwise = true, support = true;
    std::vector<double> logs, peaks, xs_mass, masses;
    for (double beta : {1e-1, 1e-2, 1e-3, 1e-4}) {
      const auto R = regularize(wall, beta);
      std::uniform_real_distribution<double> pick(0.0, 10.0 * beta);
      for (int k = 0; k < 20000; ++k) {
        const double x = pick(rng);
        const double vb = R.v_beta(x);
        if (!(vb >= 0.0 && vb <= (*wall)(x))) pointwise = false;
        if (x >= beta && R.w_beta(x) != 0.0) support = false;
        if (R.w_beta(-x) != R.w_beta(x)) support = false;
      }
      for (double x : {beta, std::nextafter(beta, 1.0), 2.0 * beta, 1.0, 30.0})
        if (R.w_beta(x) != 0.0 || R.w_beta(-x) != 0.0) support = false;
      if (!(R.v_beta(0.0) >= 0.0 && R.v_beta(0.0) <= std::numeric_limits<double>::max())) pointwise = false;
      const double L = std::abs(std::log(beta));
      logs.push_back(L);
      peaks.push_back(R.v_beta(0.0));
      xs_mass.push_back(beta * L);
      masses.push_back(R.w_beta_mass());
    }
    // y <= C x with a beta-independent C: the ratio y/x may not grow from one
    // beta to the next, and the log-log least-squares exponent must not exceed
    // (peak, x -> inf) or fall below (mass, x -> 0) one.
    auto fit = [](const std::vector<double>& x, const std::vector<double>& y, double& C, bool& no_growth) {
      C = 0.0;
      no_growth = true;
      std::vector<double> lx, ly;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] / x[k];
        if (k > 0 && r > 1.25 * y[k - 1] / x[k - 1]) no_growth = false;
        C = std::max(C, r);
        lx.push_back(std::log(x[k]));
        ly.push_back(std::log(y[k]));
      }
      return oracle::linear_fit(lx, ly).first;
    };
    double C = 0, Cp = 0;
    bool g1 = false, g2 = false;
    const double e_peak = fit(logs, peaks, C, g1);
    const double e_mass = fit(xs_mass, masses, Cp, g2);
    const bool stable = g1 && g2 && e_peak <= 1.05 && e_mass >= 0.95;
    return Outcome{pointwise && support && stable,
                   std::string(pointwise ? "0 <= V^b <= V" : "pointwise bound violated") +
                       (support ? ", supp W^b in [-b, b]" : ", support violated") + ", C = " + fmt(C) +
                       " (log-log exponent " + fmt(e_peak) + "), C' = " + fmt(Cp) + " (exponent " + fmt(e_mass) +
                       ")" + (g1 && g2 ? "" : ", ratio grows as beta shrinks")};
  });

  report(5, "continuum solver", 1.0, [&] {
    const auto rho = solve_continuum(linear);
    const auto rq = solve_continuum(make_confinement("quadratic:0"));
    const double e1 = std::abs(rho.C_U() - kRoot2);
    const double e2 = std::abs(energy_E(rho) - 2.0 * kRoot2 / 3.0);
    const double e3 = std::abs(rq.C_U() - std::pow(1.5, 2.0 / 3.0));
    return Outcome{e1 <= 1e-10 && e2 <= 1e-10 && e3 <= 1e-10,
                   "errors C_U = " + fmt(e1) + ", E = " + fmt(e2) + ", C_U(x^2) = " + fmt(e3)};
  });

  report(6, "gradient correctness", 5.0, [&] {
    const auto rho = solve_continuum(linear);
    const int n = 50;
    const double gamma = std::pow(n, 0.25);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    double worst = 0.0;
    const auto base = default_init(rho, n, gamma);
    for (int trial = 0; trial < 20; ++trial) {
      auto cfg = base;
      for (int i = 1; i <= n; ++i) cfg.x[i] = cfg.x[i - 1] + (base.x[i] - base.x[i - 1]) * (1.0 + u(rng));
      const auto g = gradient(cfg, *wall, *linear);
      double gmax = 0.0, err = 0.0;
      for (int i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1e-3, cfg.x[i + 1] - cfg.x[i]);
        auto plus = cfg, minus = cfg;
        plus.x[i + 1] += h;
        minus.x[i + 1] -= h;
        const double fd = (energy(plus, *wall, *linear) - energy(minus, *wall, *linear)) / (2.0 * h);
        gmax = std::max(gmax, std::abs(g[i]));
        err = std::max(err, std::abs(g[i] - fd));
      }
      worst = std::max(worst, err / gmax);
    }
    return Outcome{worst <= 1e-6, "max relative gradient error over 20 configurations = " + fmt(worst)};
  });

  report(7, "minimizer KKT", 120.0, [&] {
    const auto rho = solve_continuum(linear);
    bool ok = true;
    std::ostringstream os;
    for (int n : {200, 800}) {
      const double gamma = std::pow(n, 0.25);
      const auto a = minimize(default_init(rho, n, gamma), *wall, *linear);
      auto start = default_init(rho, n, gamma);
      std::mt19937_64 rng(static_cast<unsigned>(n));
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      std::vector<double> x(start.x.size(), 0.0);
      for (std::size_t i = 1; i < x.size(); ++i) x[i] = x[i - 1] + (start.x[i] - start.x[i - 1]) * (1.0 + u(rng));
      start.x = x;
      const auto b = minimize(start, *wall, *linear);
      double diff = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(a.cfg.x[i] - b.cfg.x[i]));
      const double g = std::max(a.gradient_norm, b.gradient_norm);
      ok = ok && g <= 1e-8 && diff <= 1e-8;
      os << (n == 200 ? "" : "; ") << "n = " << n << ": |grad| " << fmt(g) << ", start gap " << fmt(diff);
    }
    return Outcome{ok, os.str()};
  });

  // Criteria 8 to 10 share one sweep.
  std::vector<SweepRow> rows;
  double sweep_seconds = 0.0;
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      GammaRule rule;
      rule.p = 0.25;
      rows = gamma_sweep({{200, rule}, {800, rule}, {3200, rule}}, wall, linear);
    } catch (const std::exception& e) {
      std::printf("sweep failed: %s\n", e.what());
    }
    sweep_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  const bool sweep_ok = rows.size() == 3 && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok; });
  auto sweep_report = [&](int id, const std::string& title, const std::function<Outcome()>& body) {
    // the shared sweep's cost counts against every criterion that reads it
    report(id, title, 900.0 - sweep_seconds, [&] {
      if (!sweep_ok) return Outcome{false, "sweep rows missing or failed"};
      return body();
    });
  };

  sweep_report(8, "energy-gap boundedness", [&] {
    std::ostringstream os;
    bool ok = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      os << (k ? "; " : "") << "n = " << rows[k].n << ": " << fmt(rows[k].gap);
      if (k > 0) {
        const double var = std::abs(rows[k].gap - rows[k - 1].gap) / std::abs(rows[k - 1].gap);
        os << " (change " << fmt(var) << ")";
        ok = ok && var < 0.25;
      }
    }
    return Outcome{ok, os.str()};
  });

  sweep_report(9, "boundary-layer convergence", [&] {
    std::ostringstream os;
    bool ok = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double gapF = std::abs(rows[k].F_n - rows[k].F_star);
      os << "n = " << rows[k].n << ": dist " << fmt(rows[k].dist) << ", |F_n - F| " << fmt(gapF) << "; ";
      if (k > 0) {
        ok = ok && rows[k].dist < rows[k - 1].dist && gapF < std::abs(rows[k - 1].F_n - rows[k - 1].F_star);
      }
    }
    // Not part of the verdict: the same distance on a window next to the barrier.
    const auto rho = solve_continuum(linear);
    const auto layer = minimize_F(wall, rho.rho0(), {});
    const auto nu_star = from_grid(layer.nu_star);
    os << "window 5 dist";
    for (const auto& r : rows) os << " " << fmt(vague_distance(to_nu_n(r.cfg, rho), nu_star, 5.0));
    os << ", mass of nu* " << fmt(layer.nu_star.integral());
    return Outcome{ok, os.str()};
  });

  sweep_report(10, "F_n decomposition identity", [&] {
    const auto rho = solve_continuum(linear);
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : rows) {
      const double rel = std::abs(r.terms.sum - r.terms.direct) / std::abs(r.terms.direct);
      worst = std::max(worst, rel);
      ok = ok && rel <= 1e-8 && r.terms.T5 == rho.C_U() * r.gamma / r.n && r.terms.T4 >= 0.0;
    }
    return Outcome{ok, "worst relative mismatch " + fmt(worst) + ", T5 exact, T4 >= 0"};
  });

  report(11, "obstacle problem", 60.0, [&] {
    const auto zero = minimize_F(wall, 0.0, {40.0, 4096});
    bool zero_ok = zero.F_value == 0.0;
    for (double v : zero.nu_star.values) zero_ok = zero_ok && v == 0.0;
    const auto a = minimize_F(wall, kRoot2, {40.0, 4096});
    const auto b = minimize_F(wall, kRoot2, {40.0, 8192});
    const double routes = std::abs(a.F_value - a.F_dense) / std::abs(a.F_dense);
    const double refine = std::abs(a.F_value - b.F_value) / std::abs(b.F_value);
    const bool ok = zero_ok && routes <= 1e-4 && a.kkt_residual <= 1e-8 && refine < 0.01;
    return Outcome{ok, std::string(zero_ok ? "rho0 = 0 gives 0" : "rho0 = 0 not exactly 0") + ", F = " +
                           fmt(a.F_value) + ", route mismatch " + fmt(routes) + ", KKT " + fmt(a.kkt_residual) +
                           ", K to 2K change " + fmt(refine)};
  });

  report(12, "recovery-sequence spacing", 1.0, [&] {
    const auto rho = solve_continuum(linear);
    const int n = 3200;
    const double gamma = std::pow(n, 0.25);
    const double M = 2.0;
    GridMeasure nu(M, 64, -rho.rho0());
    for (std::size_t k = 0; k < nu.cells(); ++k) nu.values[k] = 0.5 * std::sin(3.0 * nu.cell_center(k));
    const double nu_minus = std::max(0.0, -*std::min_element(nu.values.begin(), nu.values.end()));
    const double delta = rho.rho0() - nu_minus;
    const double N = M;
    // hypotheses under which the upper bound applies, checked on the grid cells
    bool hyp = true;
    for (double z = 0.0; z <= N + 1.0; z += 1e-3) hyp = hyp && rho.rho(z / gamma) >= delta / 2;
    for (std::size_t k = 0; k < nu.cells(); ++k)
      hyp = hyp && nu.values[k] + rho.rho((k + 1) * nu.h / gamma) >= delta / 2;

    std::size_t lower_bad = 0, upper_bad = 0, checked = 0;
    for (const GridMeasure* target : std::vector<const GridMeasure*>{&nu, nullptr}) {
      const auto q = target ? quantile_init(*target, rho, n, gamma) : quantile_init(GridMeasure(), rho, n, gamma);
      const double sup_nu = target ? target->max_abs() : 0.0;
      const double lower = gamma / (n * (sup_nu + rho.rho0()));
      for (int i = 1; i <= n; ++i) {
        const double gap = q.z[i] - q.z[i - 1];
        if (!(gap >= lower)) ++lower_bad;
        if (target && hyp && q.z[i - 1] < N) {
          ++checked;
          if (!(gap <= 2.0 / delta * gamma / n)) ++upper_bad;
        }
      }
    }
    return Outcome{lower_bad == 0 && upper_bad == 0 && hyp && checked > 0,
                   std::to_string(lower_bad) + " lower-bound violations over 2 targets, " +
                       std::to_string(upper_bad) + " upper-bound violations over " + std::to_string(checked) +
                       " applicable gaps (delta = " + fmt(delta) + ")"};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
