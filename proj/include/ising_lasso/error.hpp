#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ising_lasso {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string kind = "domain_error")
      : std::runtime_error(what), kind_(std::move(kind)) {}

  /// Short machine-readable category, used by the CLI error JSON.
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what, "invalid_argument") {}
};

/// Raised by tree-only computations handed a graph that contains a cycle.
class NotATree : public Error {
 public:
  explicit NotATree(const std::string& what) : Error(what, "not_a_tree") {}
};

class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& what, double min_eigenvalue)
      : Error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) + ")", "singular_matrix"),
        min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// An iterative solver ran out of iterations; carries the last KKT residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : Error(what + " (residual " + std::to_string(residual) + " after " +
                  std::to_string(iterations) + " iterations)",
              "convergence"),
        residual_(residual),
        iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

}  // namespace ising_lasso
