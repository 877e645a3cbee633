#pragma once

// Experiment configuration: flat "key = value" lines grouped under [section]
// headers. '#' and ';' start comments.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blayer/diagnostics.hpp"

namespace blayer {

struct ExperimentConfig {
  std::string kernel = "wall";
  TableKernelOptions table;
  std::string confinement = "linear:1";
  std::vector<int> n = {200};
  GammaRule gamma;
  std::string gamma_text = "n^0.25";
  BoundaryLayerGrid grid;
  double tol = 1e-10;
  int max_iterations = 10000;
  double layer_tol = 1e-8;
  int layer_max_iterations = 2000;
  double continuum_tol = 1e-12;
  double jitter = 0.0;  // relative spacing perturbation of the initial configuration
  double window = 20.0;
  std::string out = "out";
  unsigned seed = 0;

  /// Regime flag for the configured kernel's singularity exponent a.
  bool gamma_in_regime() const { return gamma.in_regime(make_potential(kernel, table)->singularity_exponent()); }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v, int line) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'", line);
  return out;
}

inline long to_int(const std::string& key, const std::string& v, int line) {
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'", line);
  return out;
}

inline double positive(const std::string& key, const std::string& v, int line) {
  const double x = to_double(key, v, line);
  if (!(x > 0.0)) throw ConfigError("key '" + key + "': expected a positive number, got '" + v + "'", line);
  return x;
}

}  // namespace config_detail

/// Grammar: "c*n^p", "n^p", "c*sqrt(n/log(n))", "sqrt(n/log(n))"; spaces ignored.
inline GammaRule parse_gamma_rule(const std::string& text, int line = 0) {
  std::string s;
  for (char ch : text)
    if (ch != ' ' && ch != '\t') s += ch;
  static const std::string num = R"([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)";
  static const std::regex power("(?:(" + num + R"()\*)?n\^(-?)" + num + ")");
  static const std::regex logrule("(?:(" + num + R"()\*)?sqrt\(n/log\(n\)\))");
  const std::string expected = "expected c*n^p, n^p or c*sqrt(n/log(n)), got '" + text + "'";
  std::smatch m;
  GammaRule r;
  if (std::regex_match(s, m, power)) {
    r.kind = GammaRule::Kind::Power;
    r.c = m[1].matched ? config_detail::to_double("gamma", m[1].str(), line) : 1.0;
    r.p = config_detail::to_double("gamma", m[2].str(), line);
  } else if (std::regex_match(s, m, logrule)) {
    r.kind = GammaRule::Kind::SqrtNLogN;
    r.c = m[1].matched ? config_detail::to_double("gamma", m[1].str(), line) : 1.0;
    r.p = 0.0;
  } else {
    throw ConfigError("key 'gamma': " + expected, line);
  }
  if (!(r.c > 0.0)) throw ConfigError("key 'gamma': constant c must be positive", line);
  return r;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  using namespace config_detail;
  ExperimentConfig cfg;
  const std::map<std::string, std::set<std::string>> allowed = {
      {"model", {"kernel", "U", "kernel_a", "kernel_lambda", "kernel_delta"}},
      {"particles", {"n", "gamma", "jitter"}},
      {"grid", {"L", "K"}},
      {"solver", {"tol", "max_iterations", "layer_tol", "layer_max_iterations", "continuum_tol"}},
      {"diagnostics", {"window"}},
      {"output", {"dir", "seed"}},
  };
  std::set<std::string> seen;
  std::map<std::string, int> line_of;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto cut = raw.find_first_of("#;");
    const std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!allowed.count(section)) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + s + "'", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' appears before any [section]", line);
    if (!allowed.at(section).count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line);
    if (!seen.insert(section + "." + key).second) throw ConfigError("duplicate key '" + key + "'", line);
    if (value.empty()) throw ConfigError("key '" + key + "' has an empty value", line);
    line_of[key] = line;

    if (key == "kernel") {
      cfg.kernel = value;
    } else if (key == "U") {
      cfg.confinement = value;
    } else if (key == "kernel_a") {
      cfg.table.a = to_double(key, value, line);
      if (cfg.table.a < 0.0 || cfg.table.a >= 1.0) throw ConfigError("key 'kernel_a': expected 0 <= a < 1", line);
    } else if (key == "kernel_lambda") {
      cfg.table.lambda = positive(key, value, line);
    } else if (key == "kernel_delta") {
      cfg.table.delta = positive(key, value, line);
    } else if (key == "n") {
      std::string list = value;
      if (list.front() == '[' && list.back() == ']') list = list.substr(1, list.size() - 2);
      cfg.n.clear();
      std::istringstream items(list);
      std::string item;
      while (std::getline(items, item, ',')) {
        const long v = to_int(key, trim(item), line);
        if (v < 1) throw ConfigError("key 'n': every entry must be >= 1, got " + trim(item), line);
        cfg.n.push_back(static_cast<int>(v));
      }
      if (cfg.n.empty()) throw ConfigError("key 'n': expected a comma-separated list of integers", line);
    } else if (key == "gamma") {
      cfg.gamma = parse_gamma_rule(value, line);
      cfg.gamma_text = value;
    } else if (key == "jitter") {
      cfg.jitter = to_double(key, value, line);
      if (cfg.jitter < 0.0 || cfg.jitter >= 1.0) throw ConfigError("key 'jitter': expected 0 <= jitter < 1", line);
    } else if (key == "L") {
      cfg.grid.L = positive(key, value, line);
    } else if (key == "K") {
      const long k = to_int(key, value, line);
      if (k < 2 || (k & (k - 1)) != 0) throw ConfigError("key 'K': expected a power of two, got '" + value + "'", line);
      cfg.grid.K = static_cast<std::size_t>(k);
    } else if (key == "tol") {
      cfg.tol = positive(key, value, line);
    } else if (key == "max_iterations") {
      const long v = to_int(key, value, line);
      if (v < 1) throw ConfigError("key 'max_iterations': expected a positive integer", line);
      cfg.max_iterations = static_cast<int>(v);
    } else if (key == "layer_tol") {
      cfg.layer_tol = positive(key, value, line);
    } else if (key == "layer_max_iterations") {
      const long v = to_int(key, value, line);
      if (v < 1) throw ConfigError("key 'layer_max_iterations': expected a positive integer", line);
      cfg.layer_max_iterations = static_cast<int>(v);
    } else if (key == "continuum_tol") {
      cfg.continuum_tol = positive(key, value, line);
    } else if (key == "window") {
      cfg.window = positive(key, value, line);
    } else if (key == "dir") {
      cfg.out = value;
    } else if (key == "seed") {
      const long v = to_int(key, value, line);
      if (v < 0) throw ConfigError("key 'seed': expected a non-negative integer", line);
      cfg.seed = static_cast<unsigned>(v);
    }
  }
  // Build the kernel and confinement once so bad specs are reported here.
  try {
    make_potential(cfg.kernel, cfg.table);
  } catch (const Error& e) {
    throw ConfigError(std::string("key 'kernel': ") + e.what(), line_of.count("kernel") ? line_of["kernel"] : 0);
  }
  try {
    make_confinement(cfg.confinement);
  } catch (const Error& e) {
    throw ConfigError(std::string("key 'U': ") + e.what(), line_of.count("U") ? line_of["U"] : 0);
  }
  for (int n : cfg.n)
    if (!(cfg.gamma(n) > 0.0) || !std::isfinite(cfg.gamma(n)))
      throw ConfigError("gamma rule '" + cfg.gamma_text + "' is not positive at n = " + std::to_string(n));
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace blayer
