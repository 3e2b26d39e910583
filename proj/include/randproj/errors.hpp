#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace randproj {

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The coarse mesh is not an ancestor of the fine mesh.
struct MeshMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cholesky of an empirical Gram matrix met a pivot below tolerance.
struct SingularGram : std::runtime_error {
  SingularGram(std::size_t element, double pivot)
    : std::runtime_error("singular empirical Gram matrix on element " + std::to_string(element) +
                         " (pivot " + std::to_string(pivot) + ")"),
      element(element),
      pivot(pivot) {}
  std::size_t element;
  double pivot;
};

struct NoConvergence : std::runtime_error {
  NoConvergence(std::size_t iterations, double residual)
    : std::runtime_error("conjugate gradient stopped after " + std::to_string(iterations) +
                         " iterations, relative residual " + std::to_string(residual)),
      iterations(iterations),
      residual(residual) {}
  std::size_t iterations;
  double residual;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace randproj
