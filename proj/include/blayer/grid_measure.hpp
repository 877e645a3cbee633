#pragma once

// Signed density on [0, L], constant on the K cells [k h, (k + 1) h).

#include <algorithm>
#include <cmath>
#include <vector>

#include "blayer/error.hpp"

namespace blayer {

struct GridMeasure {
  double L = 0.0;
  double h = 0.0;
  std::vector<double> values;  // one per cell
  double floor = 0.0;          // admissibility: values >= floor

  GridMeasure() = default;
  GridMeasure(double length, std::size_t cells, double floor_value)
      : L(length), h(length / static_cast<double>(cells)), values(cells, 0.0), floor(floor_value) {
    if (!(length > 0.0) || cells == 0) throw DomainError("grid measure needs L > 0 and K >= 1");
  }

  std::size_t cells() const { return values.size(); }
  double cell_left(std::size_t k) const { return h * static_cast<double>(k); }
  double cell_center(std::size_t k) const { return h * (static_cast<double>(k) + 0.5); }

  /// Density at z; zero outside [0, L).
  double operator()(double z) const {
    if (z < 0.0 || z >= L) return 0.0;
    const auto k = std::min(values.size() - 1, static_cast<std::size_t>(z / h));
    return values[k];
  }

  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * h;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  bool admissible(double slack = 0.0) const {
    return std::all_of(values.begin(), values.end(),
                       [&](double v) { return std::isfinite(v) && v >= floor - slack; });
  }
};

}  // namespace blayer
