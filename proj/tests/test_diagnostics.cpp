#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "blayer/diagnostics.hpp"
#include "oracles.hpp"

using namespace blayer;

namespace {

struct Setup {
  PotentialPtr V = make_potential("wall");
  ConfinementPtr U = make_confinement("linear:1");
  ContinuumDensity rho = solve_continuum(U);
};

const Setup& setup() {
  static const Setup s;
  return s;
}

ParticleConfiguration perturbed(const ParticleConfiguration& base, double amp, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  auto cfg = base;
  for (std::size_t i = 1; i < cfg.x.size(); ++i) {
    const double gap = cfg.x[i] - cfg.x[i - 1];
    cfg.x[i] = cfg.x[i - 1] + gap * (1.0 + u(rng));
  }
  return cfg;
}

SignedMeasure lebesgue(double M) {
  SignedMeasure m;
  m.density = [](double) { return 1.0; };
  m.density_end = M;
  return m;
}

}  // namespace

TEST(NuN, MassAndNegativePart) {
  const auto& s = setup();
  const int n = 64;
  const double gamma = 3.0;
  const auto cfg = default_init(s.rho, n, gamma);
  const auto nu = to_nu_n(cfg, s.rho);
  EXPECT_EQ(nu.atoms.size(), static_cast<std::size_t>(n + 1));
  EXPECT_NEAR(nu.total_atom_mass() - gamma * s.rho.mass(), gamma / n, 1e-13);
  for (double z : {0.0, 1.0, 2.5, 4.0, 10.0}) EXPECT_EQ(nu.density(z), -s.rho.rho(z / gamma));
}

TEST(NuN, QuantileAtomsPairToZeroOnTestFunctions) {
  // A quantile placement is a Riemann sum, so the pairing is O(gamma / n).
  const auto& s = setup();
  const auto panel = vague_panel(20.0);
  std::vector<double> worst;
  for (int n : {200, 800, 3200}) {
    const double gamma = std::pow(n, 0.25);
    const auto nu = to_nu_n(default_init(s.rho, n, gamma), s.rho);
    double w = 0.0;
    for (const auto& phi : panel) {
      const double p = std::abs(nu.pair(phi));
      EXPECT_LE(p, 3.0 * gamma / n) << n;
      w = std::max(w, p);
    }
    worst.push_back(w);
  }
  EXPECT_LT(worst[2], worst[0]);
}

TEST(FnTerms, SumMatchesDirectEnergyGap) {
  const auto& s = setup();
  const int n = 60;
  const double gamma = std::pow(n, 0.25);
  const auto ref = continuum_reference(s.rho, *s.V, gamma);
  const auto base = default_init(s.rho, n, gamma);
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto cfg = perturbed(base, 0.3, seed);
    const auto t = Fn_terms(cfg, *s.V, s.rho, ref);
    EXPECT_NEAR(t.sum, t.direct, 1e-8 * std::abs(t.direct));
    EXPECT_EQ(t.T5, s.rho.C_U() * gamma / n);
    EXPECT_GE(t.T4, 0.0);
  }
}

TEST(FnTerms, OffSupportAtomsFeedT4) {
  const auto& s = setup();
  const int n = 40;
  const double gamma = 2.0;
  auto cfg = default_init(s.rho, n, gamma);
  cfg.x.back() = s.rho.support_end() + 0.5;
  cfg.x[n - 1] = s.rho.support_end() + 0.2;
  const auto t = Fn_terms(cfg, *s.V, s.rho);
  const double expected = gamma / n * ((s.rho.support_end() + 0.5 - s.rho.C_U()) + (s.rho.support_end() + 0.2 - s.rho.C_U()));
  EXPECT_NEAR(t.T4, expected, 1e-14);
  EXPECT_GT(t.T4, 0.0);
  EXPECT_NEAR(t.sum, t.direct, 1e-8 * std::abs(t.direct));
}

TEST(FnTerms, DoubleWellIdentity) {
  const auto V = make_potential("power:0.5");
  const auto U = make_confinement(std::string("table:") + BLAYER_TEST_DATA_DIR + "/double_well.csv");
  const auto rho = solve_continuum(U);
  const int n = 50;
  const auto cfg = default_init(rho, n, 2.5);
  const auto t = Fn_terms(cfg, *V, rho);
  EXPECT_NEAR(t.sum, t.direct, 1e-8 * std::abs(t.direct));
}

TEST(FnTerms, BarrierTermBothSidesAgree) {
  const auto& s = setup();
  const int n = 30;
  const double gamma = 2.0;
  const auto cfg = perturbed(default_init(s.rho, n, gamma), 0.2, 7);
  const auto t = Fn_terms(cfg, *s.V, s.rho);
  EXPECT_NEAR(barrier_term_direct(cfg, *s.V, s.rho), t.T2, 1e-9 * std::abs(t.T2));
}

TEST(FnTerms, SmoothingErrorMatchesOracle) {
  const auto& s = setup();
  const double gamma = 4.0;
  for (double x : {0.0, 0.05, 0.7, 1.3, 2.0}) {
    const double f0 = s.rho.rho_bar(x);
    auto f = [&](double t) {
      return s.V->value(t) * (s.rho.rho_bar(x - t / gamma) + s.rho.rho_bar(x + t / gamma) - 2.0 * f0);
    };
    // split at the kinks of rho_bar seen from x
    std::vector<double> pts = {0.0};
    for (double b : {0.0, s.rho.support_end()}) {
      const double t = gamma * std::abs(x - b);
      if (t > 0.0 && t < 30.0) pts.push_back(t);
    }
    pts.push_back(30.0);
    std::sort(pts.begin(), pts.end());
    double oracle_value = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) oracle_value += oracle::tanh_sinh(f, pts[k], pts[k + 1]);
    EXPECT_NEAR(smoothing_error(*s.V, s.rho, gamma, x), oracle_value, 1e-12) << x;
  }
}

TEST(FnTerms, SmoothingTermBoundedAlongMinimizers) {
  const auto& s = setup();
  std::vector<double> t3;
  for (int n : {200, 800}) {
    const double gamma = std::pow(n, 0.25);
    const auto res = minimize(default_init(s.rho, n, gamma), *s.V, *s.U);
    t3.push_back(Fn_terms(res.cfg, *s.V, s.rho).T3);
  }
  for (double v : t3) EXPECT_LT(std::abs(v), 0.1);
  EXPECT_LT(std::abs(t3[1]), std::abs(t3[0]));
}

TEST(VagueDistance, IdenticalInputsGiveZero) {
  const auto& s = setup();
  const auto nu = to_nu_n(default_init(s.rho, 100, 3.0), s.rho);
  EXPECT_EQ(vague_distance(nu, nu), 0.0);
}

TEST(VagueDistance, RiemannSumBound) {
  const int n = 1000;
  const double gamma = 5.0, M = 20.0;
  SignedMeasure atoms;
  atoms.atom_weight = gamma / n;
  for (int i = 0; i * gamma / n <= M + 1.0; ++i) atoms.atoms.push_back(i * gamma / n);
  const double d = vague_distance(atoms, lebesgue(M + 2.0), M);
  EXPECT_LE(d, gamma / n);
  EXPECT_GT(d, 0.0);
}

TEST(VagueDistance, SymmetricAndTriangle) {
  const auto& s = setup();
  std::vector<SignedMeasure> ms;
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) ms.push_back(to_nu_n(perturbed(default_init(s.rho, 80, 3.0), 0.5, seed), s.rho));
  for (std::size_t a = 0; a < ms.size(); ++a)
    for (std::size_t b = 0; b < ms.size(); ++b) {
      EXPECT_NEAR(vague_distance(ms[a], ms[b]), vague_distance(ms[b], ms[a]), 1e-15);
      for (std::size_t c = 0; c < ms.size(); ++c)
        EXPECT_LE(vague_distance(ms[a], ms[c]), vague_distance(ms[a], ms[b]) + vague_distance(ms[b], ms[c]) + 1e-15);
    }
}

TEST(GammaRule, RegimeFlag) {
  GammaRule r;
  r.p = 0.25;
  EXPECT_TRUE(r.in_regime(0.0));
  r.p = 0.5;
  EXPECT_FALSE(r.in_regime(0.0));
  r.p = 0.3;
  EXPECT_TRUE(r.in_regime(0.5));
  r.p = 0.34;
  EXPECT_FALSE(r.in_regime(0.5));
  r.p = 0.0;
  EXPECT_FALSE(r.in_regime(0.0));
  GammaRule b{GammaRule::Kind::SqrtNLogN, 1.0, 0.0};
  EXPECT_FALSE(b.in_regime(0.0));
  EXPECT_NEAR(b(100), std::sqrt(100 / std::log(100.0)), 1e-14);
}

TEST(GammaSweep, RowsAndFailuresAreRecorded) {
  const auto& s = setup();
  std::vector<SweepEntry> plan = {{40, {}}, {0, {}}, {80, {}}};
  SweepOptions opt;
  opt.grid = {40.0, 512};
  int calls = 0;
  opt.on_row = [&](const SweepRow&) { ++calls; };
  const auto rows = gamma_sweep(plan, s.V, s.U, opt);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(calls, 3);
  EXPECT_TRUE(rows[0].ok);
  EXPECT_FALSE(rows[1].ok);
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_TRUE(rows[2].ok);
  for (const auto& r : {rows[0], rows[2]}) {
    EXPECT_TRUE(r.in_regime);
    EXPECT_NEAR(r.F_n, r.gap, 1e-8 * std::abs(r.gap));
    EXPECT_LT(r.F_star, 0.0);
    EXPECT_GT(r.dist, 0.0);
    EXPECT_LE(r.grad_norm, 1e-10);
  }
}
