#pragma once

// Residual error estimator, Doerfler marking and the solve-estimate-mark-refine
// loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "randproj/fem.hpp"
#include "randproj/mesh.hpp"
#include "randproj/polybasis.hpp"
#include "randproj/projectors.hpp"
#include "randproj/random.hpp"

namespace randproj {

struct ErrorIndicator {
  std::vector<double> eta;  // per element, eta_K >= 0

  double total() const {
    double sum = 0.0;
    for (double e : eta) {
      sum += e * e;
    }
    return std::sqrt(sum);
  }
};

struct AdaptConfig {
  double theta = 0.5;
  int max_iterations = 60;
  std::size_t target_ndof = 10000;

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0)) {
      throw std::invalid_argument("bulk parameter must lie in (0, 1)");
    }
    if (max_iterations < 1 || target_ndof < 1) {
      throw std::invalid_argument("adaptive loop limits must be positive");
    }
  }
};

/// eta_K^2 = h_K^2 ||rhs + Laplace(u_h)||^2_K + h_K * sum over interior edges
/// of K of (1/2) ||[grad u_h . n]||^2_E.
inline ErrorIndicator residual_estimator(const FeSolution& u_h, const PiecewisePolynomial<Mesh>& rhs) {
  const auto& mesh = *u_h.space->mesh();
  if (rhs.mesh().get() != &mesh) {
    throw MeshMismatch("estimator data must live on the solution mesh");
  }
  const int p = u_h.space->degree();
  std::vector<double> element(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    const auto& g = mesh.geometry(k);
    // Parseval in the orthonormal basis: the Laplacian only shifts c_0
    Eigen::VectorXd c = rhs.coefficients().col(static_cast<Eigen::Index>(k));
    c(0) += u_h.laplacian(k);
    element[k] = g.diameter * g.diameter * g.area * c.squaredNorm();
  });

  const auto line = gauss_rule_segment(std::max(0, 2 * (p - 1)));
  std::vector<double> jump(mesh.num_edges(), 0.0);
  parallel_for(mesh.num_edges(), [&](std::size_t e) {
    if (mesh.is_boundary_edge(e)) {
      return;
    }
    const auto& ends = mesh.edges()[e];
    const Point2 a = mesh.vertices()[ends[0]];
    const Point2 b = mesh.vertices()[ends[1]];
    const Point2 t = b - a;
    const double length = t.norm();
    const Eigen::Vector2d n(t.y() / length, -t.x() / length);
    const auto k1 = static_cast<std::size_t>(mesh.edge_triangles()[e][0]);
    const auto k2 = static_cast<std::size_t>(mesh.edge_triangles()[e][1]);
    double sum = 0.0;
    for (std::size_t q = 0; q < line.size(); ++q) {
      const Point2 x = a + line.points[q](0) * t;
      const double j = (u_h.gradient_reference(k1, mesh.geometry(k1).to_reference(x)) -
                        u_h.gradient_reference(k2, mesh.geometry(k2).to_reference(x)))
                           .dot(n);
      sum += line.weights[q] * j * j;
    }
    jump[e] = 0.5 * length * sum;
  });

  ErrorIndicator indicator;
  indicator.eta.resize(mesh.num_cells());
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    double edges = 0.0;
    for (int j = 0; j < 3; ++j) {
      edges += jump[mesh.triangle_edges()[k][j]];
    }
    indicator.eta[k] = std::sqrt(element[k] + mesh.geometry(k).diameter * edges);
  }
  return indicator;
}

/// Smallest greedy set (descending eta, ties by index) with
/// sum_M eta_K^2 >= theta^2 sum eta_K^2.
inline std::vector<int> dorfler_mark(const ErrorIndicator& indicator, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::invalid_argument("bulk parameter must lie in (0, 1)");
  }
  std::vector<int> order(indicator.eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return indicator.eta[a] > indicator.eta[b]; });
  double total = 0.0;
  for (double e : indicator.eta) {
    total += e * e;
  }
  std::vector<int> marked;
  if (total == 0.0) {
    return marked;
  }
  double sum = 0.0;
  for (int k : order) {
    if (sum >= theta * theta * total) {
      break;
    }
    marked.push_back(k);
    sum += indicator.eta[k] * indicator.eta[k];
  }
  return marked;
}

/// Discrete data for one mesh: the load vector the solver sees and the
/// piecewise polynomial the estimator uses in its element residual.
struct DiscreteData {
  Eigen::VectorXd load;
  PiecewisePolynomial<Mesh> estimator_rhs;
};

using DataFunction = std::function<DiscreteData(const FeSpace&, const StreamFactory&)>;

/// Optional analytic solution for error reporting.
struct ExactSolution {
  ScalarFunction value;
  GradientFunction gradient;
  int quad_degree = 10;
};

struct AdaptRecord {
  int iteration = 0;
  MeshPtr mesh;
  FeSolution solution;
  ErrorIndicator indicator;
  double eta = 0.0;
  ErrorNorm h1;
  ErrorNorm l2;
};

/// solve -> estimate -> mark -> bisect until the next mesh would exceed the
/// target ndof. Iteration i draws its randomness from level label i.
inline std::vector<AdaptRecord> adaptive_loop(MeshPtr initial, int degree, const DataFunction& data,
                                              const AdaptConfig& config, const StreamFactory& seeds,
                                              const std::optional<ExactSolution>& exact = std::nullopt) {
  config.validate();
  std::vector<AdaptRecord> records;
  MeshPtr mesh = std::move(initial);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    auto space = FeSpace::make(mesh, degree);
    const StreamFactory level_seeds = seeds.with_level(static_cast<std::uint32_t>(iter));
    DiscreteData d = data(*space, level_seeds);
    AdaptRecord rec{iter, mesh, solve_poisson(space, d.load), {}, 0.0, {}, {}};
    rec.indicator = residual_estimator(rec.solution, d.estimator_rhs);
    rec.eta = rec.indicator.total();
    if (exact) {
      rec.h1 = h1_seminorm_error(rec.solution, exact->gradient, exact->quad_degree);
      rec.l2 = l2_error(rec.solution, exact->value, exact->quad_degree);
    }
    records.push_back(std::move(rec));
    const auto& last = records.back();
    if (last.eta == 0.0 || space->ndof() >= config.target_ndof) {
      break;
    }
    MeshPtr next = bisect(mesh, dorfler_mark(last.indicator, config.theta));
    if (FeSpace(next, degree).ndof() > config.target_ndof) {
      break;
    }
    mesh = std::move(next);
  }
  return records;
}

}  // namespace randproj
