#include <cmath>
#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "blayer/confinement.hpp"

using namespace blayer;

namespace {

const std::string kDoubleWell = std::string(BLAYER_TEST_DATA_DIR) + "/double_well.csv";

std::string write_table(const std::string& name, const std::vector<std::pair<double, double>>& rows) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream out(path);
  out << "x,U\n";
  for (auto [x, u] : rows) out << x << "," << u << "\n";
  return path;
}

void expect_derivatives_match(const ConfiningPotential& U, double lo, double hi) {
  for (int k = 1; k < 200; ++k) {
    const double x = lo + (hi - lo) * (k + 0.37) / 200.0;
    const double h = 1e-6;
    const double fd = (U.value(x + h) - U.value(x - h)) / (2 * h);
    EXPECT_NEAR(U.derivative(x), fd, 1e-6 * std::max(1.0, std::abs(fd))) << U.name() << " x=" << x;
  }
}

}  // namespace

TEST(Confinement, LinearClosedForm) {
  auto U = make_confinement("linear:1");
  EXPECT_EQ(U->value(0.0), 0.0);
  EXPECT_EQ(U->value(2.5), 2.5);
  EXPECT_EQ(U->derivative(7.0), 1.0);
  EXPECT_EQ(U->growth_witness(), 0.0);
  expect_derivatives_match(*U, 0.0, 5.0);
}

TEST(Confinement, QuadraticShiftedToZeroMinimum) {
  auto U = make_confinement("quadratic:0");
  EXPECT_EQ(U->value(2.0), 4.0);
  EXPECT_EQ(U->value(0.0), 0.0);
  auto left = make_confinement("quadratic:-1");
  EXPECT_EQ(left->value(0.0), 0.0);
  EXPECT_EQ(left->value(1.0), 3.0);
  auto right = make_confinement("quadratic:2");
  EXPECT_EQ(right->value(2.0), 0.0);
  EXPECT_EQ(right->value(0.0), 4.0);
  EXPECT_EQ(right->growth_witness(), 2.0);
  expect_derivatives_match(*right, 0.0, 6.0);
}

TEST(Confinement, RejectsInvalidFamilies) {
  EXPECT_THROW(make_confinement("linear:0"), DomainError);
  EXPECT_THROW(make_confinement("linear:-2"), DomainError);
  EXPECT_THROW(make_confinement("linear:x"), DomainError);
  EXPECT_THROW(make_confinement("cubic:1"), DomainError);
  EXPECT_THROW(make_confinement("table:/nonexistent/U.csv"), DomainError);
}

TEST(Confinement, TableRejectsNonzeroMinimum) {
  const auto path = write_table("u_shift.csv", {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  EXPECT_THROW(make_confinement("table:" + path), DomainError);
  std::remove(path.c_str());
}

TEST(Confinement, TableRejectsDecreasingTail) {
  const auto path = write_table("u_tail.csv", {{0, 0}, {1, 2}, {2, 3}, {3, 1}});
  EXPECT_THROW(make_confinement("table:" + path), DomainError);
  std::remove(path.c_str());
}

TEST(Confinement, TableRejectsUnsortedKnots) {
  const auto path = write_table("u_sort.csv", {{0, 0}, {2, 2}, {1, 3}, {3, 4}});
  EXPECT_THROW(make_confinement("table:" + path), DomainError);
  std::remove(path.c_str());
}

TEST(Confinement, TableInterpolatesKnotsAndStaysMonotone) {
  auto U = make_confinement("table:" + kDoubleWell);
  std::ifstream in(kDoubleWell);
  std::string line;
  std::getline(in, line);
  std::vector<double> xs, us;
  while (std::getline(in, line)) {
    double x, u;
    char comma;
    std::istringstream(line) >> x >> comma >> u;
    xs.push_back(x);
    us.push_back(u);
    EXPECT_NEAR(U->value(x), u, 1e-14 * (1 + u));
  }
  // Between knots the interpolant stays within the knot values.
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (int k = 1; k < 10; ++k) {
      const double x = xs[i] + (xs[i + 1] - xs[i]) * k / 10.0;
      EXPECT_GE(U->value(x), std::min(us[i], us[i + 1]) - 1e-14);
      EXPECT_LE(U->value(x), std::max(us[i], us[i + 1]) + 1e-14);
    }
  }
  EXPECT_GE(U->growth_witness(), 3.0);
  EXPECT_LT(U->growth_witness(), 3.1);
  EXPECT_GT(U->value(100.0), U->value(xs.back()));
  expect_derivatives_match(*U, 0.0, 5.5);
}

TEST(Confinement, TableSecondDerivativeMatchesSlopeDifferences) {
  auto U = make_confinement("table:" + kDoubleWell);
  for (double x : {0.31, 1.12, 2.01, 3.33, 4.77}) {
    const double h = 1e-6;
    const double fd = (U->derivative(x + h) - U->derivative(x - h)) / (2 * h);
    EXPECT_NEAR(U->second_derivative(x), fd, 1e-5 * std::max(1.0, std::abs(fd))) << x;
  }
}
