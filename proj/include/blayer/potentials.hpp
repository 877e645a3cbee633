#pragma once

// Interaction kernels V: even, nonnegative, convex on (0, inf), unit mass.
// Each kernel carries its singularity exponent a, the local convexity pair
// (lambda, delta), the tail g(x) = int_x^inf V and the Fourier multiplier
// v(w) = int V(x) exp(-2 pi i x w) dx.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "blayer/error.hpp"
#include "blayer/quadrature.hpp"

namespace blayer {

inline constexpr double kPi = std::numbers::pi;

class InteractionPotential {
 public:
  virtual ~InteractionPotential() = default;

  virtual std::string name() const = 0;

  /// V(|x|) for x > 0. Returns +inf at 0 for singular kernels.
  virtual double value(double x) const = 0;
  /// V'(x) for x > 0 (the one-sided derivative at 0 for bounded kernels).
  virtual double derivative(double x) const = 0;
  virtual double second_derivative(double x) const = 0;
  /// Fourier multiplier, even in omega.
  virtual double fourier(double omega) const = 0;
  /// False when fourier() runs a quadrature per call.
  virtual bool closed_form_fourier() const { return true; }
  /// True when V(x) -> inf as x -> 0.
  virtual bool singular() const = 0;

  /// Beyond this radius the remaining mass is given by mass_beyond().
  virtual double cutoff() const = 0;
  virtual double mass_beyond(double x) const = 0;

  double singularity_exponent() const { return a_; }
  double lambda() const { return lambda_; }
  double delta() const { return delta_; }
  double normalization() const { return c_norm_; }

  /// Even extension.
  double operator()(double x) const { return value(std::abs(x)); }

  /// g(x) = int_x^inf V(y) dy, x >= 0.
  virtual double tail(double x) const {
    if (x < 0.0) throw DomainError("tail integral requires x >= 0");
    return integrate_beyond(x, [this](double y) { return value(y); }, mass_beyond(std::max(x, cutoff())));
  }

  /// int_x^inf (y - x) V(y) dy = int_x^inf g.
  virtual double tail_moment(double x) const {
    if (x < 0.0) throw DomainError("tail moment requires x >= 0");
    // remainder past the cutoff, dominated by (cut - x) mass_beyond(cut)
    const double cut = std::max(x, cutoff());
    return integrate_beyond(x, [this, x](double y) { return (y - x) * value(y); },
                            (cut - x) * mass_beyond(cut));
  }

 protected:
  InteractionPotential(double a, double lambda, double delta, double c_norm)
      : a_(a), lambda_(lambda), delta_(delta), c_norm_(c_norm) {}

  void set_constants(double a, double lambda, double delta, double c_norm) {
    a_ = a;
    lambda_ = lambda;
    delta_ = delta;
    c_norm_ = c_norm;
  }

  /// int_x^cutoff f + remainder; panels are graded toward x.
  template <class F>
  double integrate_beyond(double x, F f, double remainder) const {
    const double cut = cutoff();
    if (x >= cut) return remainder;
    const double near = std::min(cut, x + 1.0);
    // 120 levels take the innermost panel below 1e-72, enough for x^-a with a < 1
    const auto br = quad::graded_breaks(x, near, true, x < 1e-12 ? 120 : 40, 0.25);
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) s += quad::gauss_panel(f, br[k], br[k + 1]);
    return s + quad::integrate_uniform(f, near, cut, 0.5) + remainder;
  }

 private:
  double a_;
  double lambda_;
  double delta_;
  double c_norm_;
};

using PotentialPtr = std::shared_ptr<const InteractionPotential>;

namespace detail {

// sinh(2z)/2 - z without cancellation for small z.
inline double half_sinh2_minus_id(double z) {
  if (z >= 1.0) return 0.5 * std::sinh(2.0 * z) - z;
  const double t = 2.0 * z;
  const double t2 = t * t;
  double term = t * t2 / 6.0;  // t^3/3!
  double s = 0.0;
  for (int k = 1; k < 40 && term > 1e-18 * s; ++k) {
    s += term;
    term *= t2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
  }
  return 0.5 * s;
}

}  // namespace detail

/// V_wall(x) = x coth x - log|2 sinh x|, scaled by 3/pi^2 to unit mass.
class WallPotential final : public InteractionPotential {
 public:
  static constexpr double kRawMass = kPi * kPi / 3.0;
  static constexpr double kSeriesBranch = 1e-3;
  static constexpr double kTailBranch = 20.0;

  WallPotential() : InteractionPotential(0.0, 0.0, 1.0, 1.0 / kRawMass) {
    // V'' is decreasing on (0, inf), so its infimum over (0, delta) sits at delta.
    set_constants(0.0, second_derivative(1.0), 1.0, 1.0 / kRawMass);
  }

  std::string name() const override { return "wall"; }

  static double raw(double x) {
    x = std::abs(x);
    if (x == 0.0) return std::numeric_limits<double>::infinity();
    if (x < kSeriesBranch) {
      const double x2 = x * x;
      return 1.0 - std::log(2.0 * x) + x2 / 6.0 - x2 * x2 / 60.0;
    }
    if (x > kTailBranch) {
      const double q = std::exp(-2.0 * x);
      return (2.0 * x + 1.0) * q + (2.0 * x + 0.5) * q * q;
    }
    // -log(1 - q), q = e^{-2x}: log1p once 1 - q no longer cancels
    const double log_omq = x < 0.35 ? std::log(-std::expm1(-2.0 * x)) : std::log1p(-std::exp(-2.0 * x));
    return 2.0 * x / std::expm1(2.0 * x) - log_omq;
  }

  static double raw_derivative(double x) {
    if (x < kSeriesBranch) {
      const double x2 = x * x;
      return -1.0 / x + x / 3.0 - x * x2 / 15.0;
    }
    const double q = std::exp(-2.0 * x);
    const double omq = -std::expm1(-2.0 * x);
    return -4.0 * x * q / (omq * omq);
  }

  static double raw_second_derivative(double x) {
    if (x < kSeriesBranch) {
      const double x2 = x * x;
      return 1.0 / x2 + 1.0 / 3.0 - x2 / 5.0;
    }
    const double q = std::exp(-2.0 * x);
    const double omq = -std::expm1(-2.0 * x);
    const double coth = (1.0 + q) / omq;
    const double inv_sinh2 = 4.0 * q / (omq * omq);
    return (2.0 * x * coth - 1.0) * inv_sinh2;
  }

  /// Closed-form transform of the raw kernel; raw_fourier(0) = pi^2/3.
  static double raw_fourier(double omega) {
    const double w = std::abs(omega);
    const double z = kPi * kPi * w;
    if (z < 1e-8) return kRawMass - 2.0 * kPi * kPi * z * z / 45.0;
    const double sh = std::sinh(z);
    if (z > 300.0) return 1.0 / (2.0 * w);  // exponentially small remainder
    return detail::half_sinh2_minus_id(z) / (sh * sh) / (2.0 * w);
  }

  double value(double x) const override { return normalization() * raw(x); }
  double derivative(double x) const override { return normalization() * raw_derivative(x); }
  double second_derivative(double x) const override {
    return normalization() * raw_second_derivative(x);
  }
  double fourier(double omega) const override { return normalization() * raw_fourier(omega); }
  bool singular() const override { return true; }
  double cutoff() const override { return 30.0; }
  double mass_beyond(double x) const override {
    // int_x^inf (2y+1) e^{-2y} dy
    return normalization() * (x + 1.0) * std::exp(-2.0 * x);
  }
};

/// Tempered power kernel V(x) = c_a |x|^{-a} e^{-|x|}, c_a = 1/(2 Gamma(1-a)).
/// Bounded (non-singular) for a = 0.
class TemperedPowerPotential final : public InteractionPotential {
 public:
  explicit TemperedPowerPotential(double a)
      : InteractionPotential(a, 0.0, 1.0, 0.5 / std::tgamma(1.0 - a)) {
    if (!(a >= 0.0 && a < 1.0)) throw DomainError("power kernel requires 0 <= a < 1");
    set_constants(a, second_derivative(1.0), 1.0, normalization());
  }

  std::string name() const override {
    std::ostringstream os;
    os << "power:" << singularity_exponent();
    return os.str();
  }

  double value(double x) const override {
    const double a = singularity_exponent();
    if (x == 0.0) return a > 0.0 ? std::numeric_limits<double>::infinity() : normalization();
    return normalization() * std::pow(x, -a) * std::exp(-x);
  }
  double derivative(double x) const override {
    const double a = singularity_exponent();
    if (x == 0.0) return a > 0.0 ? -std::numeric_limits<double>::infinity() : -normalization();
    return -normalization() * std::exp(-x) * std::pow(x, -a) * (a / x + 1.0);
  }
  double second_derivative(double x) const override {
    const double a = singularity_exponent();
    if (x == 0.0) return a > 0.0 ? std::numeric_limits<double>::infinity() : normalization();
    return normalization() * std::exp(-x) * std::pow(x, -a) *
           (a * (a + 1.0) / (x * x) + 2.0 * a / x + 1.0);
  }
  double fourier(double omega) const override {
    const double a = singularity_exponent();
    const double k = 2.0 * kPi * omega;
    return std::cos((1.0 - a) * std::atan(k)) / std::pow(1.0 + k * k, 0.5 * (1.0 - a));
  }
  bool singular() const override { return singularity_exponent() > 0.0; }
  double cutoff() const override { return 45.0; }
  double mass_beyond(double x) const override {
    // leading term of the incomplete gamma function
    const double a = singularity_exponent();
    return normalization() * std::pow(x, -a) * std::exp(-x) * (1.0 - a / x);
  }
};

/// Piecewise-linear kernel read from a two-column CSV "x,V" (x > 0 strictly
/// increasing). Extended linearly below the first knot, zero past the last.
class TablePotential final : public InteractionPotential {
 public:
  TablePotential(std::vector<double> x, std::vector<double> v, double a, double lambda,
                 double delta, std::string label = "table")
      : InteractionPotential(a, lambda, delta, 1.0), x_(std::move(x)), v_(std::move(v)),
        label_(std::move(label)) {
    if (x_.size() < 2 || x_.size() != v_.size())
      throw DomainError("kernel table needs at least two (x, V) rows");
    if (x_.front() < 0.0) throw DomainError("kernel table must start at x >= 0");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1])) throw DomainError("kernel table x must be strictly increasing");
    double raw_half_mass = 0.0;
    raw_half_mass += x_.front() * (raw_at(0.0) + v_.front()) / 2.0;
    for (std::size_t i = 1; i < x_.size(); ++i)
      raw_half_mass += (x_[i] - x_[i - 1]) * (v_[i] + v_[i - 1]) / 2.0;
    if (!(raw_half_mass > 0.0)) throw DomainError("kernel table has nonpositive mass");
    set_constants(a, lambda, delta, 0.5 / raw_half_mass);
  }

  static std::shared_ptr<TablePotential> from_csv(const std::string& path, double a, double lambda,
                                                  double delta) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open kernel table " + path);
    std::string line;
    std::vector<double> xs, vs;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      if (lineno == 1 && line.find_first_of("0123456789") != 0 && line[0] != '-' &&
          line[0] != '.') {
        continue;  // header
      }
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double xv, vv;
      if (!(ls >> xv >> vv))
        throw DomainError("kernel table " + path + ": malformed row " + std::to_string(lineno));
      xs.push_back(xv);
      vs.push_back(vv);
    }
    return std::make_shared<TablePotential>(xs, vs, a, lambda, delta, "table:" + path);
  }

  std::string name() const override { return label_; }

  double value(double x) const override { return normalization() * raw_at(x); }
  double derivative(double x) const override { return normalization() * slope_at(x); }
  double second_derivative(double) const override { return 0.0; }
  double fourier(double omega) const override {
    const double k = 2.0 * kPi * omega;
    const double width = std::min(0.25, 0.25 / (std::abs(omega) + 1e-300));
    auto f = [&](double y) { return value(y) * std::cos(k * y); };
    double s = quad::integrate_uniform(f, 0.0, x_.front(), width);
    for (std::size_t i = 1; i < x_.size(); ++i) s += quad::integrate_uniform(f, x_[i - 1], x_[i], width);
    return 2.0 * s;
  }
  bool closed_form_fourier() const override { return false; }
  bool singular() const override { return false; }
  double cutoff() const override { return x_.back(); }
  double mass_beyond(double) const override { return 0.0; }

  // Exact for the piecewise-linear profile: Simpson on each clipped segment.
  double tail(double x) const override {
    if (x < 0.0) throw DomainError("tail integral requires x >= 0");
    return segment_sum(x, [this](double y) { return value(y); });
  }
  double tail_moment(double x) const override {
    if (x < 0.0) throw DomainError("tail moment requires x >= 0");
    return segment_sum(x, [this, x](double y) { return (y - x) * value(y); });
  }

 private:
  template <class F>
  double segment_sum(double x, F f) const {
    auto simpson = [&](double lo, double hi) {
      if (!(hi > lo)) return 0.0;
      const double m = 0.5 * (lo + hi);
      // right endpoint taken from the left so the last knot keeps its value
      return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(m) + f(std::nextafter(hi, lo)));
    };
    double s = simpson(x, x_.front());
    for (std::size_t i = 1; i < x_.size(); ++i) s += simpson(std::max(x, x_[i - 1]), x_[i]);
    return s;
  }

  double raw_at(double x) const {
    if (x > x_.back()) return 0.0;
    if (x == x_.back()) return v_.back();
    if (x <= x_.front()) {
      const double s = (v_[1] - v_[0]) / (x_[1] - x_[0]);
      return v_[0] + s * (x - x_[0]);
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin());
    const double t = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
    return v_[i - 1] + t * (v_[i] - v_[i - 1]);
  }
  double slope_at(double x) const {
    if (x > x_.back()) return 0.0;
    if (x <= x_.front()) return (v_[1] - v_[0]) / (x_[1] - x_[0]);
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = std::min(static_cast<std::size_t>(it - x_.begin()), x_.size() - 1);
    return (v_[i] - v_[i - 1]) / (x_[i] - x_[i - 1]);
  }

  std::vector<double> x_;
  std::vector<double> v_;
  std::string label_;
};

struct TableKernelOptions {
  double a = 0.0;
  double lambda = 0.0;
  double delta = 0.0;
};

/// Kernel by name: "wall", "power:a", "table:path".
inline PotentialPtr make_potential(const std::string& spec, const TableKernelOptions& table = {}) {
  if (spec == "wall") return std::make_shared<WallPotential>();
  if (spec.rfind("power:", 0) == 0) {
    const std::string arg = spec.substr(6);
    std::size_t used = 0;
    double a = 0.0;
    try {
      a = std::stod(arg, &used);
    } catch (const std::exception&) {
      throw DomainError("power kernel: cannot parse exponent '" + arg + "'");
    }
    if (used != arg.size()) throw DomainError("power kernel: cannot parse exponent '" + arg + "'");
    return std::make_shared<TemperedPowerPotential>(a);
  }
  if (spec.rfind("table:", 0) == 0) {
    if (!(table.lambda > 0.0 && table.delta > 0.0))
      throw DomainError("table kernel requires positive lambda and delta");
    return TablePotential::from_csv(spec.substr(6), table.a, table.lambda, table.delta);
  }
  throw DomainError("unknown kernel '" + spec + "' (expected wall, power:a or table:path)");
}

inline PotentialPtr make_wall_potential() { return std::make_shared<WallPotential>(); }

inline double tail_integral(const InteractionPotential& V, double x) { return V.tail(x); }

/// Tangent-parabola regularization V^beta and its remainder W^beta = V - V^beta.
class RegularizedPotential {
 public:
  RegularizedPotential(PotentialPtr base, double beta) : base_(std::move(base)), beta_(beta) {
    if (!base_) throw DomainError("regularize: null kernel");
    if (!(beta > 0.0)) throw DomainError("regularize: beta must be positive");
    if (!(beta < base_->delta()))
      throw DomainError("regularize: beta must lie below delta, where the lambda-convexity holds");
    v_beta_ = base_->value(beta);
    dv_beta_ = base_->derivative(beta);
  }

  const InteractionPotential& base() const { return *base_; }
  double beta() const { return beta_; }

  double v_beta(double x) const {
    x = std::abs(x);
    if (x >= beta_) return base_->value(x);
    const double d = x - beta_;
    return v_beta_ + d * dv_beta_ + 0.5 * base_->lambda() * d * d;
  }
  double w_beta(double x) const {
    x = std::abs(x);
    if (x >= beta_) return 0.0;
    return base_->value(x) - v_beta(x);
  }
  double v_beta_derivative(double x) const {
    if (x >= beta_) return base_->derivative(x);
    return dv_beta_ + base_->lambda() * (x - beta_);
  }

  /// int_R W^beta.
  double w_beta_mass() const {
    return 2.0 * quad::integrate_graded([this](double x) { return w_beta(x); }, 0.0, beta_, true);
  }

 private:
  PotentialPtr base_;
  double beta_;
  double v_beta_;
  double dv_beta_;
};

inline RegularizedPotential regularize(PotentialPtr V, double beta) {
  return RegularizedPotential(std::move(V), beta);
}

struct AssumptionGrid {
  int samples = 2000;        // x samples on (0, x_max]
  double x_max = 10.0;
  int omega_samples = 2001;  // omega samples on [0, omega_max]
  double omega_max = 100.0;
};

struct AssumptionItem {
  std::string name;
  bool passed = false;
  double constant = std::numeric_limits<double>::quiet_NaN();  // fitted constant when relevant
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionItem> items;

  bool all_passed() const {
    return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
  }
  const AssumptionItem& item(const std::string& name) const {
    for (const auto& i : items)
      if (i.name == name) return i;
    throw DomainError("no assumption item named " + name);
  }
};

/// Sampled checks of the kernel assumptions. Failures are report entries.
inline AssumptionReport verify_assumptions(const InteractionPotential& V, const AssumptionGrid& grid = {}) {
  if (grid.samples < 3 || grid.omega_samples < 2) throw DomainError("assumption grid too coarse");
  AssumptionReport rep;
  auto add = [&](std::string name, bool ok, double c, std::string detail) {
    rep.items.push_back({std::move(name), ok, c, std::move(detail)});
  };

  // Log-spaced near 0, linear further out.
  std::vector<double> xs;
  const int n = grid.samples;
  for (int k = 0; k < n / 2; ++k) xs.push_back(1e-8 * std::pow(1.0 / 1e-8, double(k) / (n / 2)));
  for (int k = 0; k <= n - n / 2; ++k) xs.push_back(1.0 + (grid.x_max - 1.0) * k / (n - n / 2));
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  {
    double worst = 0.0;
    bool ok = true;
    for (double x : xs) {
      const double v = V(x);
      if (!(v >= 0.0)) ok = false;
      worst = std::min(worst, v);
    }
    add("nonnegative", ok, worst, ok ? "V >= 0 on samples" : "negative or NaN value");
  }
  {
    bool ok = true;
    for (double x : xs)
      if (!(V(-x) == V(x))) ok = false;
    add("even", ok, 0.0, ok ? "V(-x) = V(x)" : "asymmetric");
  }
  {
    bool ok = true;
    for (std::size_t k = 1; k < xs.size(); ++k)
      if (!(V(xs[k]) <= V(xs[k - 1]) + 1e-15 * std::abs(V(xs[k - 1])))) ok = false;
    add("non-increasing", ok, 0.0, ok ? "monotone on (0, x_max]" : "increase detected");
  }
  {
    // Second differences with a step relative to x.
    bool convex = true, lconvex = true;
    double min_dd_near = std::numeric_limits<double>::infinity();
    for (double x : xs) {
      const double h = 1e-3 * x;
      const double dd = (V(x + h) - 2.0 * V(x) + V(x - h)) / (h * h);
      const double scale = std::abs(V(x)) / (h * h) * 1e-12 + 1e-12;
      if (!(dd >= -scale)) convex = false;
      if (x + h < V.delta()) {
        min_dd_near = std::min(min_dd_near, dd);
        if (!(dd >= V.lambda() * (1.0 - 1e-6) - scale)) lconvex = false;
      }
    }
    add("convex", convex, 0.0, convex ? "second differences >= 0" : "negative second difference");
    add("lambda-convex", lconvex && V.lambda() > 0.0, min_dd_near,
        "min second difference on (0, delta) vs lambda = " + std::to_string(V.lambda()));
  }
  {
    double mass = std::numeric_limits<double>::quiet_NaN();
    try {
      mass = 2.0 * V.tail(0.0);
    } catch (const Error&) {
    }
    const bool ok = std::abs(mass - 1.0) <= 1e-8;
    add("unit mass", ok, mass, "int_R V");
  }
  {
    double m1 = std::numeric_limits<double>::quiet_NaN();
    double far = std::numeric_limits<double>::quiet_NaN();
    try {
      const double cut = V.cutoff();
      auto f = [&](double x) { return x * V.value(x); };
      m1 = 2.0 * quad::integrate_piecewise(f, 0.0, cut, {}, 0.5, {0.0});
      far = 2.0 * quad::integrate_uniform(f, 0.5 * cut, cut, 0.5);
    } catch (const Error&) {
    }
    const bool ok = std::isfinite(m1) && std::abs(far) <= 1e-6 * std::abs(m1) + 1e-12;
    add("first moment", ok, m1, "int |x| V, truncated at cutoff");
  }
  {
    bool ok = true;
    if (V.singular()) {
      ok = V(1e-12) >= 2.0 * V(1e-3);
    } else {
      ok = false;
    }
    add("singular at 0", ok, V(1e-12), ok ? "V -> inf at 0" : "V bounded near 0");
  }
  {
    const double a = V.singularity_exponent();
    double C = 0.0;
    for (double x : xs) {
      if (x > 0.5) break;
      const double b = a > 0.0 ? std::pow(x, -a) : -std::log(x);
      C = std::max(C, V(x) / b);
    }
    add("singularity bound", std::isfinite(C) && C > 0.0, C,
        a > 0.0 ? "V(x) <= C x^-a on (0, 1/2]" : "V(x) <= C |log x| on (0, 1/2]");
  }
  {
    double c = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.omega_samples; ++k) {
      const double w = grid.omega_max * k / (grid.omega_samples - 1);
      const double ref = std::min(1.0, 1.0 / (w * w));
      const double r = V.fourier(w) / ref;
      if (!(r == r)) {
        c = std::numeric_limits<double>::quiet_NaN();
        break;
      }
      c = std::min(c, r);
    }
    add("fourier lower bound", c > 0.0, c, "v(w) >= c min{1, w^-2}");
  }
  {
    // Bounded first and second differences of sqrt(v).
    const int m = grid.omega_samples;
    const double h = grid.omega_max / (m - 1);
    double d1 = 0.0, d2 = 0.0;
    for (int k = 1; k + 1 < m; ++k) {
      const double w = h * k;
      const double sm = std::sqrt(V.fourier(w - h)), s0 = std::sqrt(V.fourier(w)),
                   sp = std::sqrt(V.fourier(w + h));
      d1 = std::max(d1, std::abs(sp - sm) / (2 * h));
      d2 = std::max(d2, std::abs(sp - 2 * s0 + sm) / (h * h));
    }
    const bool ok = std::isfinite(d1) && std::isfinite(d2) && d2 < 1e6;
    add("sqrt(v) regularity", ok, d2, "sampled max |(sqrt v)''|");
  }
  return rep;
}

}  // namespace blayer
