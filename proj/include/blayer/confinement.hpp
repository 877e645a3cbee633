#pragma once

// Confining potentials U on [0, inf): C^1, min U = 0, U -> inf.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

// pchip.hpp calls isnan unqualified; math.h puts it in the global namespace.
#include <math.h>

#include <boost/math/interpolators/pchip.hpp>

#include "blayer/error.hpp"

namespace blayer {

class ConfiningPotential {
 public:
  virtual ~ConfiningPotential() = default;

  virtual std::string name() const = 0;
  virtual double value(double x) const = 0;
  virtual double derivative(double x) const = 0;
  virtual double second_derivative(double x) const = 0;

  /// X0 with U non-decreasing on [X0, inf).
  virtual double growth_witness() const = 0;

  /// Points splitting [0, X0] into pieces on which U is monotone and smooth.
  virtual std::vector<double> breakpoints() const = 0;

  double operator()(double x) const { return value(x); }
};

using ConfinementPtr = std::shared_ptr<const ConfiningPotential>;

/// U(x) = s x.
class LinearConfinement final : public ConfiningPotential {
 public:
  explicit LinearConfinement(double slope) : s_(slope) {
    if (!(slope > 0.0)) throw DomainError("linear confinement requires slope > 0");
  }
  std::string name() const override {
    std::ostringstream os;
    os << "linear:" << s_;
    return os.str();
  }
  double value(double x) const override { return s_ * x; }
  double derivative(double) const override { return s_; }
  double second_derivative(double) const override { return 0.0; }
  double growth_witness() const override { return 0.0; }
  std::vector<double> breakpoints() const override { return {}; }
  double slope() const { return s_; }

 private:
  double s_;
};

/// U(x) = (x - b)^2 - min_{x >= 0} (x - b)^2.
class QuadraticConfinement final : public ConfiningPotential {
 public:
  explicit QuadraticConfinement(double b) : b_(b), shift_(b < 0.0 ? b * b : 0.0) {
    if (!std::isfinite(b)) throw DomainError("quadratic confinement requires finite b");
  }
  std::string name() const override {
    std::ostringstream os;
    os << "quadratic:" << b_;
    return os.str();
  }
  double value(double x) const override { return (x - b_) * (x - b_) - shift_; }
  double derivative(double x) const override { return 2.0 * (x - b_); }
  double second_derivative(double) const override { return 2.0; }
  double growth_witness() const override { return std::max(0.0, b_); }
  std::vector<double> breakpoints() const override {
    if (b_ > 0.0) return {b_};
    return {};
  }

 private:
  double b_;
  double shift_;
};

/// Monotone cubic (PCHIP) through CSV knots "x,U", x strictly increasing from 0.
/// Extended linearly past the last knot with the end slope, which must be > 0.
class TableConfinement final : public ConfiningPotential {
 public:
  TableConfinement(std::vector<double> x, std::vector<double> u, std::string label = "table")
      : label_(std::move(label)) {
    if (x.size() < 4 || x.size() != u.size())
      throw DomainError("confinement table needs at least four (x, U) rows");
    if (x.front() != 0.0) throw DomainError("confinement table must start at x = 0");
    for (std::size_t i = 1; i < x.size(); ++i)
      if (!(x[i] > x[i - 1])) throw DomainError("confinement table x must be strictly increasing");
    // Monotone interpolation: the minimum is attained at a knot.
    const double umin = *std::min_element(u.begin(), u.end());
    if (umin != 0.0)
      throw DomainError("confinement table must have min U = 0 (found " + std::to_string(umin) + ")");
    std::size_t j = x.size() - 1;
    while (j > 0 && u[j - 1] <= u[j]) --j;
    witness_ = x[j];
    x_ = x;
    u_ = u;
    interp_ = std::make_shared<Interp>(std::move(x), std::move(u));
    slopes_.resize(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) slopes_[i] = interp_->prime(x_[i]);
    if (!(slopes_.back() > 0.0))
      throw DomainError("confinement table: non-increasing tail, no growth witness");
  }

  static std::shared_ptr<TableConfinement> from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open confinement table " + path);
    std::string line;
    std::vector<double> xs, us;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      if (lineno == 1 && line.find_first_of("0123456789-.") != 0) continue;  // header
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double xv, uv;
      if (!(ls >> xv >> uv))
        throw DomainError("confinement table " + path + ": malformed row " + std::to_string(lineno));
      xs.push_back(xv);
      us.push_back(uv);
    }
    return std::make_shared<TableConfinement>(xs, us, "table:" + path);
  }

  std::string name() const override { return label_; }

  double value(double x) const override {
    if (x >= x_.back()) return u_.back() + slopes_.back() * (x - x_.back());
    return (*interp_)(std::max(x, 0.0));
  }
  double derivative(double x) const override {
    if (x >= x_.back()) return slopes_.back();
    return interp_->prime(std::max(x, 0.0));
  }
  double second_derivative(double x) const override {
    if (x >= x_.back() || x < 0.0) return 0.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double d = (u_[i + 1] - u_[i]) / h;
    const double s0 = slopes_[i], s1 = slopes_[i + 1];
    const double t = x - x_[i];
    return (6.0 * d - 4.0 * s0 - 2.0 * s1) / h + (6.0 * (s0 + s1) - 12.0 * d) * t / (h * h);
  }
  double growth_witness() const override { return witness_; }
  std::vector<double> breakpoints() const override { return x_; }

 private:
  using Interp = boost::math::interpolators::pchip<std::vector<double>>;

  std::string label_;
  std::vector<double> x_;
  std::vector<double> u_;
  std::vector<double> slopes_;
  std::shared_ptr<Interp> interp_;
  double witness_ = 0.0;
};

/// Confinement by name: "linear:s", "quadratic:b", "table:path".
inline ConfinementPtr make_confinement(const std::string& spec) {
  auto number = [&](const std::string& arg) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != arg.size())
      throw DomainError("confinement '" + spec + "': cannot parse parameter '" + arg + "'");
    return v;
  };
  if (spec.rfind("linear:", 0) == 0) return std::make_shared<LinearConfinement>(number(spec.substr(7)));
  if (spec.rfind("quadratic:", 0) == 0)
    return std::make_shared<QuadraticConfinement>(number(spec.substr(10)));
  if (spec.rfind("table:", 0) == 0) return TableConfinement::from_csv(spec.substr(6));
  throw DomainError("unknown confinement '" + spec + "' (expected linear:s, quadratic:b or table:path)");
}

}  // namespace blayer
