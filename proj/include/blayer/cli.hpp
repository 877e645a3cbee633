#pragma once

// Subcommand drivers behind the blayer executable. Each writes its artifacts
// under cfg.out and returns a process exit code.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "blayer/config.hpp"
#include "blayer/io.hpp"

namespace blayer::cli {

enum ExitCode : int { kOk = 0, kSolverFailure = 1, kConfigError = 2 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"continuum", "minimize", "boundary-layer",
                                                 "sweep",     "compare",  "verify-assumptions"};
  return names;
}

namespace detail {

using nlohmann::json;
namespace fs = std::filesystem;

inline void write_json(const fs::path& path, const json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

inline json config_json(const ExperimentConfig& c) {
  return {{"kernel", c.kernel},
          {"U", c.confinement},
          {"n", c.n},
          {"gamma", c.gamma_text},
          {"L", c.grid.L},
          {"K", c.grid.K},
          {"tol", c.tol},
          {"layer_tol", c.layer_tol},
          {"seed", c.seed},
          {"jitter", c.jitter}};
}

inline MinimizeOptions minimize_options(const ExperimentConfig& c) {
  MinimizeOptions o;
  o.tol = c.tol;
  o.max_iterations = c.max_iterations;
  return o;
}

inline MinimizeFOptions layer_options(const ExperimentConfig& c) {
  MinimizeFOptions o;
  o.tol = c.layer_tol;
  o.max_iterations = c.layer_max_iterations;
  return o;
}

// Quantile start with every gap scaled by an independent factor in [1 - jitter, 1 + jitter].
inline ParticleConfiguration start(const ContinuumDensity& rho, int n, double gamma, const ExperimentConfig& c) {
  auto cfg = default_init(rho, n, gamma);
  if (c.jitter == 0.0) return cfg;
  std::mt19937_64 rng(c.seed * 1000003ull + static_cast<unsigned long long>(n));
  std::uniform_real_distribution<double> u(-c.jitter, c.jitter);
  std::vector<double> x(cfg.x.size(), cfg.x[0]);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] = x[i - 1] + (cfg.x[i] - cfg.x[i - 1]) * (1.0 + u(rng));
  cfg.x = std::move(x);
  return cfg;
}

inline std::string tag(int n) { return "_n" + std::to_string(n); }

inline int continuum(const ExperimentConfig& c, std::ostream& log) {
  const auto U = make_confinement(c.confinement);
  const auto rho = solve_continuum(U, c.continuum_tol);
  const double E = energy_E(rho);
  const fs::path out(c.out);

  std::string csv = "x,rho\n";
  const double lo = std::min(0.0, rho.support().front().lo), hi = 1.1 * rho.support_end();
  const int samples = 1000;
  for (int k = 0; k <= samples; ++k) {
    const double x = lo + (hi - lo) * k / samples;
    csv += io::csv_line(std::vector<double>{x, rho(x)});
  }
  io::write_atomic(out / "continuum.csv", csv);

  json support = json::array();
  for (const auto& I : rho.support()) support.push_back({I.lo, I.hi});
  write_json(out / "summary.json", {{"subcommand", "continuum"},
                                    {"config", config_json(c)},
                                    {"C_U", rho.C_U()},
                                    {"rho0", rho.rho0()},
                                    {"mass", rho.mass()},
                                    {"E", E},
                                    {"support", support}});
  log << "C_U = " << io::fmt(rho.C_U()) << ", rho*(0) = " << io::fmt(rho.rho0()) << ", E(rho*) = " << io::fmt(E)
      << "\n";
  return kOk;
}

inline int minimize_cmd(const ExperimentConfig& c, std::ostream& log) {
  const auto V = make_potential(c.kernel, c.table);
  const auto U = make_confinement(c.confinement);
  const auto rho = solve_continuum(U, c.continuum_tol);
  const fs::path out(c.out);
  auto opt = minimize_options(c);
  opt.record_trace = true;
  if (!c.gamma_in_regime())
    log << "warning: gamma = " << c.gamma_text << " is outside the scaling regime for this kernel\n";
  json rows = json::array();
  int code = kOk;
  for (int n : c.n) {
    const double gamma = c.gamma(n);
    try {
      const auto init = start(rho, n, gamma, c);
      const auto res = minimize(init, *V, *U, opt);
      std::string csv = "i,x\n";
      for (std::size_t i = 0; i < res.cfg.x.size(); ++i)
        csv += io::csv_line({std::to_string(i), io::fmt(res.cfg.x[i])});
      io::write_atomic(out / ("minimizer" + tag(n) + ".csv"), csv);
      // row k: the iterate after k accepted steps
      std::vector<double> energies = {energy(init, *V, *U)};
      energies.insert(energies.end(), res.energy_trace.begin(), res.energy_trace.end());
      std::string trace = "step,energy,gradient_norm\n";
      for (std::size_t k = 0; k < std::min(energies.size(), res.gradient_trace.size()); ++k)
        trace += io::csv_line({std::to_string(k), io::fmt(energies[k]), io::fmt(res.gradient_trace[k])});
      io::write_atomic(out / ("trace" + tag(n) + ".csv"), trace);
      rows.push_back({{"n", n},
                      {"gamma", gamma},
                      {"ok", true},
                      {"energy", res.energy},
                      {"gradient_norm", res.gradient_norm},
                      {"iterations", res.iterations},
                      {"newton_steps", res.newton_steps},
                      {"lbfgs_steps", res.lbfgs_steps}});
      log << "n = " << n << ": E_n = " << io::fmt(res.energy) << ", |grad| = " << res.gradient_norm << " after "
          << res.iterations << " iterations\n";
    } catch (const SolverError& e) {
      rows.push_back({{"n", n}, {"gamma", gamma}, {"ok", false}, {"error", e.what()}, {"residual", e.residual()}});
      log << "n = " << n << ": " << e.what() << "\n";
      code = kSolverFailure;
    }
  }
  write_json(out / "summary.json", {{"subcommand", "minimize"}, {"config", config_json(c)}, {"rows", rows}});
  return code;
}

inline int boundary_layer(const ExperimentConfig& c, std::ostream& log) {
  const auto V = make_potential(c.kernel, c.table);
  const auto rho = solve_continuum(make_confinement(c.confinement), c.continuum_tol);
  const auto res = minimize_F(V, rho.rho0(), c.grid, layer_options(c));
  const fs::path out(c.out);
  std::string csv = "z_left,z_right,nu\n";
  const auto& nu = res.nu_star;
  for (std::size_t k = 0; k < nu.cells(); ++k)
    csv += io::csv_line(std::vector<double>{nu.cell_left(k), nu.cell_left(k) + nu.h, nu.values[k]});
  io::write_atomic(out / "profile.csv", csv);
  write_json(out / "summary.json", {{"subcommand", "boundary-layer"},
                                    {"config", config_json(c)},
                                    {"rho0", res.rho0},
                                    {"F", res.F_value},
                                    {"F_dense", res.F_dense},
                                    {"kkt_residual", res.kkt_residual},
                                    {"iterations", res.iterations},
                                    {"cg_iterations", res.cg_iterations},
                                    {"active_cells", res.active_cells},
                                    {"nu_mass", nu.integral()}});
  log << "F(nu*) = " << io::fmt(res.F_value) << " (dense " << io::fmt(res.F_dense) << "), KKT residual "
      << res.kkt_residual << "\n";
  return kOk;
}

inline json row_json(const SweepRow& r) {
  json j = {{"n", r.n}, {"gamma", r.gamma}, {"rule", r.rule}, {"in_regime", r.in_regime}, {"ok", r.ok},
            {"seconds", r.seconds}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j.update({{"E_n", r.E_n},
            {"E_gamma", r.E_gamma},
            {"gap", r.gap},
            {"F_n", r.F_n},
            {"F_star", r.F_star},
            {"vague_distance", r.dist},
            {"T1", r.terms.T1},
            {"T2", r.terms.T2},
            {"T3", r.terms.T3},
            {"T4", r.terms.T4},
            {"T5", r.terms.T5},
            {"gradient_norm", r.grad_norm},
            {"iterations", r.iterations}});
  return j;
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, PotentialPtr V, ConfinementPtr U,
                                       const fs::path& log_path, std::ostream& log) {
  std::vector<SweepEntry> plan;
  for (int n : c.n) plan.push_back({n, c.gamma});
  SweepOptions opt;
  opt.grid = c.grid;
  opt.window = c.window;
  opt.minimize = minimize_options(c);
  opt.layer = layer_options(c);
  std::string jsonl;
  opt.on_row = [&](const SweepRow& r) {
    jsonl += row_json(r).dump() + "\n";
    io::write_atomic(log_path, jsonl);
    log << "n = " << r.n << (r.ok ? "" : " FAILED: " + r.error);
    if (r.ok) log << ": F_n = " << io::fmt(r.F_n) << ", vague distance " << io::fmt(r.dist);
    log << "\n";
  };
  if (!c.gamma_in_regime())
    log << "warning: gamma = " << c.gamma_text << " is outside the scaling regime for this kernel\n";
  return gamma_sweep(plan, std::move(V), std::move(U), opt);
}

inline int sweep(const ExperimentConfig& c, std::ostream& log) {
  const fs::path out(c.out);
  const auto rows =
      run_sweep(c, make_potential(c.kernel, c.table), make_confinement(c.confinement), out / "sweep.jsonl", log);
  std::string csv = "n,gamma,in_regime,ok,E_n,E_gamma,gap,F_n,F_star,vague_distance,T1,T2,T3,T4,T5,gradient_norm,iterations\n";
  json jrows = json::array();
  int code = kOk;
  for (const auto& r : rows) {
    csv += io::csv_line({std::to_string(r.n), io::fmt(r.gamma), r.in_regime ? "1" : "0", r.ok ? "1" : "0",
                         io::fmt(r.E_n), io::fmt(r.E_gamma), io::fmt(r.gap), io::fmt(r.F_n), io::fmt(r.F_star),
                         io::fmt(r.dist), io::fmt(r.terms.T1), io::fmt(r.terms.T2), io::fmt(r.terms.T3),
                         io::fmt(r.terms.T4), io::fmt(r.terms.T5), io::fmt(r.grad_norm), std::to_string(r.iterations)});
    jrows.push_back(row_json(r));
    if (!r.ok) code = kSolverFailure;
  }
  io::write_atomic(out / "sweep.csv", csv);
  write_json(out / "summary.json", {{"subcommand", "sweep"}, {"config", config_json(c)}, {"rows", jrows}});
  return code;
}

inline int compare(const ExperimentConfig& c, std::ostream& log) {
  const auto V = make_potential(c.kernel, c.table);
  const auto U = make_confinement(c.confinement);
  const auto rho = solve_continuum(U, c.continuum_tol);
  const fs::path out(c.out);
  const auto layer = minimize_F(V, rho.rho0(), c.grid, layer_options(c));
  const auto rows = run_sweep(c, V, U, out / "compare.jsonl", log);
  const auto& nu = layer.nu_star;
  json jrows = json::array();
  int code = kOk;
  for (const auto& r : rows) {
    jrows.push_back(row_json(r));
    if (!r.ok) {
      code = kSolverFailure;
      continue;
    }
    // nu_n averaged over the cells of the nu* grid, up to the diagnostic window
    const std::size_t cells = std::min(nu.cells(), static_cast<std::size_t>(std::ceil(c.window / nu.h)));
    std::vector<double> count(cells, 0.0);
    for (double x : r.cfg.x) {
      const double z = r.gamma * x;
      if (z >= 0.0 && z < cells * nu.h) count[std::min(cells - 1, static_cast<std::size_t>(z / nu.h))] += 1.0;
    }
    std::string csv = "z_left,z_right,nu_n,nu_star\n";
    for (std::size_t k = 0; k < cells; ++k) {
      const double zl = nu.cell_left(k), zr = zl + nu.h;
      const double background = quad::integrate_piecewise([&](double z) { return rho(z / r.gamma); }, zl, zr, {}, nu.h);
      const double nun = (count[k] * r.gamma / r.n - background) / nu.h;
      csv += io::csv_line(std::vector<double>{zl, zr, nun, nu.values[k]});
    }
    io::write_atomic(out / ("profiles" + tag(r.n) + ".csv"), csv);

    const auto profile = profile_rho_star_gamma(nu, rho, r.gamma);
    std::string crosses = "x,discrete_density,rho_gamma,rho_star\n";
    for (const auto& [x, d] : density_crosses(r.cfg))
      crosses += io::csv_line(std::vector<double>{x, d, profile(x), rho(x)});
    io::write_atomic(out / ("crosses" + tag(r.n) + ".csv"), crosses);
  }
  write_json(out / "summary.json", {{"subcommand", "compare"},
                                    {"config", config_json(c)},
                                    {"F_star", layer.F_value},
                                    {"rows", jrows}});
  return code;
}

inline int verify(const ExperimentConfig& c, std::ostream& log) {
  const auto V = make_potential(c.kernel, c.table);
  const auto rep = verify_assumptions(*V);
  std::string csv = "item,passed,constant,detail\n";
  json items = json::array();
  for (const auto& i : rep.items) {
    std::string detail = i.detail;
    for (auto& ch : detail)
      if (ch == ',' || ch == '\n') ch = ';';
    csv += io::csv_line({i.name, i.passed ? "1" : "0", io::fmt(i.constant), detail});
    items.push_back({{"item", i.name}, {"passed", i.passed}, {"detail", i.detail}});
    if (std::isfinite(i.constant)) items.back()["constant"] = i.constant;
    log << (i.passed ? "ok   " : "FAIL ") << i.name << ": " << i.detail << "\n";
  }
  const fs::path out(c.out);
  io::write_atomic(out / "assumptions.csv", csv);
  write_json(out / "summary.json", {{"subcommand", "verify-assumptions"},
                                    {"config", config_json(c)},
                                    {"all_passed", rep.all_passed()},
                                    {"items", items}});
  return kOk;
}

}  // namespace detail

/// Runs one subcommand. Library errors map to exit codes; nothing escapes.
inline int run(const std::string& subcommand, const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  try {
    if (subcommand == "continuum") return detail::continuum(cfg, log);
    if (subcommand == "minimize") return detail::minimize_cmd(cfg, log);
    if (subcommand == "boundary-layer") return detail::boundary_layer(cfg, log);
    if (subcommand == "sweep") return detail::sweep(cfg, log);
    if (subcommand == "compare") return detail::compare(cfg, log);
    if (subcommand == "verify-assumptions") return detail::verify(cfg, log);
    log << "unknown subcommand '" << subcommand << "'\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    // bad kernel or confinement specs surface here
    log << "invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    log << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
}

}  // namespace blayer::cli
