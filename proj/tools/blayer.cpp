#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "blayer/cli.hpp"

int main(int argc, char** argv) {
  using namespace blayer;
  CLI::App app{"Equilibria of repelling particles against a barrier, and their boundary layers"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out;
  int threads = 0;
  std::optional<unsigned> seed;

  for (const auto& name : cli::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (key = value with [sections])");
    sub->add_option("--out", out, "output directory (overrides [output] dir)");
    sub->add_option("--threads", threads, "worker threads (default: BLAYER_THREADS, else 1)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "seed for jittered starts (overrides [output] seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kConfigError;
  }

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = parse_config(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kConfigError;
  }
  if (!out.empty()) cfg.out = out;
  if (seed) cfg.seed = *seed;
  if (threads > 0) set_thread_count(threads);

  return cli::run(app.get_subcommands().front()->get_name(), cfg);
}
