#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blayer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature did not reach its tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : Error(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// Two independent numerical routes disagree beyond tolerance.
class ConsistencyError : public Error {
 public:
  ConsistencyError(const std::string& what, double first, double second)
      : Error(what), first_(first), second_(second) {}
  double first() const noexcept { return first_; }
  double second() const noexcept { return second_; }

 private:
  double first_;
  double second_;
};

/// An iterative solver stopped without meeting its tolerance. Carries the
/// best iterate seen and its residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> best_iterate, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        best_iterate_(std::move(best_iterate)),
        residual_(residual) {}
  const std::vector<double>& best_iterate() const noexcept { return best_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_iterate_;
  double residual_;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace blayer
