#pragma once

// P1/P2 Lagrange elements for -Laplace(u) = f on a polygon with homogeneous
// Dirichlet data. Dofs are the mesh vertices, followed by the edge midpoints
// for p = 2. Linear systems are restricted to the free (interior) dofs.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <unsupported/Eigen/SparseExtra>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/mesh.hpp"
#include "randproj/parallel.hpp"
#include "randproj/polybasis.hpp"
#include "randproj/projectors.hpp"

namespace randproj {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Lagrange shape functions on the reference triangle. Local dofs 0..2 are
/// the vertices; for p = 2 local dof 3 + j is the midpoint of edge j
/// (opposite vertex j).
struct LagrangeShape {
  static int local_count(int p) { return p == 1 ? 3 : 6; }

  static std::array<double, 3> barycentric(double u, double v) { return {1.0 - u - v, u, v}; }

  static const std::array<Eigen::Vector2d, 3>& barycentric_gradients() {
    static const std::array<Eigen::Vector2d, 3> g{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 0),
                                                  Eigen::Vector2d(0, 1)};
    return g;
  }

  static void values(int p, double u, double v, std::span<double> out) {
    const auto l = barycentric(u, v);
    if (p == 1) {
      for (int i = 0; i < 3; ++i) {
        out[i] = l[i];
      }
      return;
    }
    for (int i = 0; i < 3; ++i) {
      out[i] = l[i] * (2 * l[i] - 1);
      out[3 + i] = 4 * l[(i + 1) % 3] * l[(i + 2) % 3];
    }
  }

  /// Reference gradients, one row per local dof.
  static Eigen::Matrix<double, 6, 2> gradients(int p, double u, double v) {
    const auto l = barycentric(u, v);
    const auto& g = barycentric_gradients();
    Eigen::Matrix<double, 6, 2> out = Eigen::Matrix<double, 6, 2>::Zero();
    if (p == 1) {
      for (int i = 0; i < 3; ++i) {
        out.row(i) = g[i].transpose();
      }
      return out;
    }
    for (int i = 0; i < 3; ++i) {
      const int a = (i + 1) % 3;
      const int b = (i + 2) % 3;
      out.row(i) = ((4 * l[i] - 1) * g[i]).transpose();
      out.row(3 + i) = (4 * (l[b] * g[a] + l[a] * g[b])).transpose();
    }
    return out;
  }

  /// Reference Hessians (constant on the element, zero for p = 1).
  static std::array<Eigen::Matrix2d, 6> hessians(int p) {
    std::array<Eigen::Matrix2d, 6> out;
    out.fill(Eigen::Matrix2d::Zero());
    if (p == 1) {
      return out;
    }
    const auto& g = barycentric_gradients();
    for (int i = 0; i < 3; ++i) {
      const int a = (i + 1) % 3;
      const int b = (i + 2) % 3;
      out[i] = 4 * g[i] * g[i].transpose();
      out[3 + i] = 4 * (g[a] * g[b].transpose() + g[b] * g[a].transpose());
    }
    return out;
  }

  /// Reference coordinates of local dof i.
  static Point2 node(int i) {
    static const std::array<Point2, 6> nodes{Point2(0, 0),     Point2(1, 0),     Point2(0, 1),
                                             Point2(0.5, 0.5), Point2(0, 0.5), Point2(0.5, 0)};
    return nodes[static_cast<std::size_t>(i)];
  }
};

class FeSpace;
using FeSpacePtr = std::shared_ptr<const FeSpace>;

/// Lagrange space of degree p on a mesh with homogeneous Dirichlet dofs.
class FeSpace {
public:
  FeSpace(MeshPtr mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    if (degree != 1 && degree != 2) {
      throw std::invalid_argument("Lagrange degree must be 1 or 2");
    }
    const auto nv = mesh_->num_vertices();
    const auto ne = mesh_->num_edges();
    num_dofs_ = degree == 1 ? nv : nv + ne;
    boundary_.assign(num_dofs_, false);
    for (std::size_t e = 0; e < ne; ++e) {
      if (mesh_->is_boundary_edge(e)) {
        boundary_[mesh_->edges()[e][0]] = true;
        boundary_[mesh_->edges()[e][1]] = true;
        if (degree == 2) {
          boundary_[nv + e] = true;
        }
      }
    }
    free_index_.assign(num_dofs_, -1);
    for (std::size_t d = 0; d < num_dofs_; ++d) {
      if (!boundary_[d]) {
        free_index_[d] = static_cast<int>(free_dofs_.size());
        free_dofs_.push_back(static_cast<int>(d));
      }
    }
    element_dofs_.resize(mesh_->num_cells());
    for (std::size_t k = 0; k < mesh_->num_cells(); ++k) {
      auto& dofs = element_dofs_[k];
      dofs.fill(-1);
      for (int i = 0; i < 3; ++i) {
        dofs[i] = mesh_->triangles()[k][i];
        if (degree == 2) {
          dofs[3 + i] = static_cast<int>(nv) + mesh_->triangle_edges()[k][i];
        }
      }
    }
  }

  static FeSpacePtr make(MeshPtr mesh, int degree) { return std::make_shared<const FeSpace>(std::move(mesh), degree); }

  const MeshPtr& mesh() const { return mesh_; }
  int degree() const { return degree_; }
  int local_count() const { return LagrangeShape::local_count(degree_); }

  /// All dofs including the boundary.
  std::size_t num_dofs() const { return num_dofs_; }
  /// Interior dofs; the size of every linear system.
  std::size_t ndof() const { return free_dofs_.size(); }

  const std::array<int, 6>& element_dofs(std::size_t k) const { return element_dofs_[k]; }
  bool is_boundary(std::size_t dof) const { return boundary_[dof]; }
  int free_index(std::size_t dof) const { return free_index_[dof]; }
  const std::vector<int>& free_dofs() const { return free_dofs_; }

  Point2 dof_point(std::size_t dof) const {
    const auto nv = mesh_->num_vertices();
    if (dof < nv) {
      return mesh_->vertices()[dof];
    }
    const auto& e = mesh_->edges()[dof - nv];
    return 0.5 * (mesh_->vertices()[e[0]] + mesh_->vertices()[e[1]]);
  }

  /// Full-length vector from interior values, zero on the boundary.
  Eigen::VectorXd extend(const Eigen::VectorXd& interior) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_dofs_));
    for (std::size_t i = 0; i < free_dofs_.size(); ++i) {
      full(free_dofs_[i]) = interior(static_cast<Eigen::Index>(i));
    }
    return full;
  }

  Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd interior(static_cast<Eigen::Index>(free_dofs_.size()));
    for (std::size_t i = 0; i < free_dofs_.size(); ++i) {
      interior(static_cast<Eigen::Index>(i)) = full(free_dofs_[i]);
    }
    return interior;
  }

  /// Physical gradients of the local shape functions at reference point r.
  Eigen::Matrix<double, 6, 2> physical_gradients(std::size_t k, const Point2& r) const {
    const Eigen::Matrix2d& inv = mesh_->geometry(k).inverse_matrix;
    return LagrangeShape::gradients(degree_, r.x(), r.y()) * inv;
  }

private:
  MeshPtr mesh_;
  int degree_;
  std::size_t num_dofs_ = 0;
  std::vector<bool> boundary_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
  std::vector<std::array<int, 6>> element_dofs_;
};

/// Lagrange function: coefficients for all dofs (zero on the boundary for
/// discrete solutions) plus solver metadata.
struct FeSolution {
  FeSpacePtr space;
  Eigen::VectorXd coefficients;
  int iterations = 0;
  double residual = 0.0;

  std::size_t ndof() const { return space->ndof(); }

  double eval_reference(std::size_t k, const Point2& r) const {
    std::array<double, 6> phi{};
    LagrangeShape::values(space->degree(), r.x(), r.y(), phi);
    const auto& dofs = space->element_dofs(k);
    double sum = 0.0;
    for (int i = 0; i < space->local_count(); ++i) {
      sum += coefficients(dofs[i]) * phi[i];
    }
    return sum;
  }

  Eigen::Vector2d gradient_reference(std::size_t k, const Point2& r) const {
    const auto grads = space->physical_gradients(k, r);
    const auto& dofs = space->element_dofs(k);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int i = 0; i < space->local_count(); ++i) {
      g += coefficients(dofs[i]) * grads.row(i).transpose();
    }
    return g;
  }

  /// Laplacian on element k (constant for p <= 2).
  double laplacian(std::size_t k) const {
    if (space->degree() == 1) {
      return 0.0;
    }
    const Eigen::Matrix2d& inv = space->mesh()->geometry(k).inverse_matrix;
    const auto hess = LagrangeShape::hessians(2);
    const auto& dofs = space->element_dofs(k);
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) {
      sum += coefficients(dofs[i]) * (inv.transpose() * hess[i] * inv).trace();
    }
    return sum;
  }
};

struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
};

namespace detail {

template <class Local>
SparseMatrix assemble_matrix(const FeSpace& space, bool constrained, Local&& local) {
  const auto& mesh = *space.mesh();
  const int n = space.local_count();
  std::vector<Eigen::Matrix<double, 6, 6>> blocks(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) { blocks[k] = local(k); });
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.num_cells() * static_cast<std::size_t>(n * n));
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const auto& dofs = space.element_dofs(k);
    for (int i = 0; i < n; ++i) {
      const int gi = constrained ? space.free_index(dofs[i]) : dofs[i];
      if (gi < 0) {
        continue;
      }
      for (int j = 0; j < n; ++j) {
        const int gj = constrained ? space.free_index(dofs[j]) : dofs[j];
        if (gj >= 0) {
          triplets.emplace_back(gi, gj, blocks[k](i, j));
        }
      }
    }
  }
  const auto size = static_cast<Eigen::Index>(constrained ? space.ndof() : space.num_dofs());
  SparseMatrix a(size, size);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

// Adds per-element local vectors into the interior load vector, in element order.
inline Eigen::VectorXd gather_load(const FeSpace& space, const std::vector<Eigen::Matrix<double, 6, 1>>& local) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.ndof()));
  for (std::size_t k = 0; k < local.size(); ++k) {
    const auto& dofs = space.element_dofs(k);
    for (int i = 0; i < space.local_count(); ++i) {
      const int gi = space.free_index(dofs[i]);
      if (gi >= 0) {
        b(gi) += local[k](i);
      }
    }
  }
  return b;
}

template <class F>
Eigen::VectorXd assemble_load(const FeSpace& space, const QuadratureRule<2>& quad, F&& value_at) {
  const auto& mesh = *space.mesh();
  const int p = space.degree();
  std::vector<std::array<double, 6>> phi(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    LagrangeShape::values(p, quad.points[q].x(), quad.points[q].y(), phi[q]);
  }
  std::vector<Eigen::Matrix<double, 6, 1>> local(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    const double jac = 2.0 * mesh.geometry(k).area;
    Eigen::Matrix<double, 6, 1> v = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const double fw = quad.weights[q] * jac * value_at(k, quad.points[q]);
      for (int i = 0; i < space.local_count(); ++i) {
        v(i) += fw * phi[q][i];
      }
    }
    local[k] = v;
  });
  return gather_load(space, local);
}

}  // namespace detail

inline Eigen::Matrix<double, 6, 6> element_stiffness(const FeSpace& space, std::size_t k) {
  const auto& g = space.mesh()->geometry(k);
  Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
  if (space.degree() == 1) {
    const auto grads = space.physical_gradients(k, Point2(0, 0));
    local.topLeftCorner<3, 3>() = g.area * grads.topRows<3>() * grads.topRows<3>().transpose();
    return local;
  }
  static const QuadratureRule<2> quad = gauss_rule_triangle(2);
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const auto grads = space.physical_gradients(k, quad.points[q]);
    local += (quad.weights[q] * 2.0 * g.area) * grads * grads.transpose();
  }
  return local;
}

/// Stiffness matrix on the interior dofs (or on all dofs).
inline SparseMatrix assemble_stiffness(const FeSpace& space, bool constrained = true) {
  return detail::assemble_matrix(space, constrained, [&](std::size_t k) { return element_stiffness(space, k); });
}

/// Mass matrix on the interior dofs (or on all dofs).
inline SparseMatrix assemble_mass(const FeSpace& space, bool constrained = true) {
  const int p = space.degree();
  const auto quad = gauss_rule_triangle(2 * p);
  return detail::assemble_matrix(space, constrained, [&](std::size_t k) {
    Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
    const double jac = 2.0 * space.mesh()->geometry(k).area;
    for (std::size_t q = 0; q < quad.size(); ++q) {
      Eigen::Matrix<double, 6, 1> phi = Eigen::Matrix<double, 6, 1>::Zero();
      LagrangeShape::values(p, quad.points[q].x(), quad.points[q].y(), std::span<double>(phi.data(), 6));
      local += quad.weights[q] * jac * phi * phi.transpose();
    }
    return local;
  });
}

/// Exact load vector int q phi_i for a piecewise polynomial q on the space's
/// mesh or on any coarser mesh of its refinement history.
inline Eigen::VectorXd assemble_load_poly(const FeSpace& space, const PiecewisePolynomial<Mesh>& q) {
  const auto& mesh = *space.mesh();
  const auto quad = gauss_rule_triangle(q.degree() + space.degree());
  if (q.mesh().get() == &mesh) {
    return detail::assemble_load(space, quad,
                                 [&](std::size_t k, const Point2& r) { return q.eval_reference(k, r); });
  }
  const std::vector<int> ancestors = ancestor_map(mesh, *q.mesh());
  return detail::assemble_load(space, quad, [&](std::size_t k, const Point2& r) {
    return q.eval(static_cast<std::size_t>(ancestors[k]), mesh.geometry(k).to_physical(r));
  });
}

/// Load vector int f phi_i by the Gauss rule of the given exactness degree.
template <class Rhs>
Eigen::VectorXd assemble_load_quadrature(const FeSpace& space, const Rhs& f, int order) {
  if (order < 1) {
    throw std::invalid_argument("quadrature order must be at least 1");
  }
  const auto quad = gauss_rule_triangle(order);
  const auto& mesh = *space.mesh();
  return detail::assemble_load(space, quad,
                               [&](std::size_t k, const Point2& r) { return f(mesh.geometry(k).to_physical(r)); });
}

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations_per_dof = 10;
};

/// Jacobi-preconditioned conjugate gradients on the interior system.
inline Eigen::VectorXd cg_solve(const SparseMatrix& a, const Eigen::VectorXd& b, int* iterations = nullptr,
                                double* residual = nullptr, const SolverOptions& options = {}) {
  if (b.size() == 0 || b.squaredNorm() == 0.0) {
    if (iterations != nullptr) {
      *iterations = 0;
    }
    if (residual != nullptr) {
      *residual = 0.0;
    }
    return Eigen::VectorXd::Zero(b.size());
  }
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations_per_dof * static_cast<int>(b.size()));
  cg.compute(a);
  Eigen::VectorXd x = cg.solve(b);
  if (cg.info() != Eigen::Success) {
    throw NoConvergence(static_cast<std::size_t>(cg.iterations()), cg.error());
  }
  if (iterations != nullptr) {
    *iterations = static_cast<int>(cg.iterations());
  }
  if (residual != nullptr) {
    *residual = cg.error();
  }
  return x;
}

inline FeSolution solve(const FeSpacePtr& space, const SparseSystem& system, const SolverOptions& options = {}) {
  FeSolution u;
  u.space = space;
  u.coefficients = space->extend(cg_solve(system.matrix, system.rhs, &u.iterations, &u.residual, options));
  return u;
}

/// Convenience: stiffness plus a given interior load.
inline FeSolution solve_poisson(const FeSpacePtr& space, const Eigen::VectorXd& load, const SolverOptions& options = {}) {
  return solve(space, SparseSystem{assemble_stiffness(*space), load}, options);
}

/// Nodal interpolant on all dofs (boundary values kept).
template <class F>
Eigen::VectorXd interpolate(const FeSpace& space, const F& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(space.num_dofs()));
  for (std::size_t d = 0; d < space.num_dofs(); ++d) {
    v(static_cast<Eigen::Index>(d)) = f(space.dof_point(d));
  }
  return v;
}

/// Coarse Lagrange function represented on a refined space of the same
/// degree. Nested spaces make this exact.
inline FeSolution prolongate(const FeSolution& coarse, const FeSpacePtr& fine) {
  if (coarse.space->degree() != fine->degree()) {
    throw std::invalid_argument("prolongation needs equal polynomial degrees");
  }
  FeSolution result;
  result.space = fine;
  const auto& fine_mesh = *fine->mesh();
  const auto& coarse_mesh = *coarse.space->mesh();
  if (&fine_mesh == &coarse_mesh) {
    result.coefficients = coarse.coefficients;
    return result;
  }
  const std::vector<int> ancestors = ancestor_map(fine_mesh, coarse_mesh);
  result.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fine->num_dofs()));
  std::vector<char> done(fine->num_dofs(), 0);
  for (std::size_t k = 0; k < fine_mesh.num_cells(); ++k) {
    const auto& dofs = fine->element_dofs(k);
    const auto& g = coarse_mesh.geometry(static_cast<std::size_t>(ancestors[k]));
    for (int i = 0; i < fine->local_count(); ++i) {
      if (done[dofs[i]] != 0) {
        continue;
      }
      done[dofs[i]] = 1;
      result.coefficients(dofs[i]) =
          coarse.eval_reference(static_cast<std::size_t>(ancestors[k]), g.to_reference(fine->dof_point(dofs[i])));
    }
  }
  return result;
}

/// ||grad v||^2 of a Lagrange function given by all-dof coefficients.
inline double h1_seminorm_squared(const FeSpace& space, const Eigen::VectorXd& full) {
  const auto& mesh = *space.mesh();
  std::vector<double> local(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    Eigen::Matrix<double, 6, 1> c = Eigen::Matrix<double, 6, 1>::Zero();
    const auto& dofs = space.element_dofs(k);
    for (int i = 0; i < space.local_count(); ++i) {
      c(i) = full(dofs[i]);
    }
    local[k] = c.dot(element_stiffness(space, k) * c);
  });
  double sum = 0.0;
  for (double v : local) {
    sum += v;
  }
  return sum;
}

inline double l2_norm_squared(const FeSpace& space, const Eigen::VectorXd& full) {
  const auto& mesh = *space.mesh();
  const auto quad = gauss_rule_triangle(2 * space.degree());
  FeSolution v{std::shared_ptr<const FeSpace>(&space, [](const FeSpace*) {}), full};
  std::vector<double> local(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    const double jac = 2.0 * mesh.geometry(k).area;
    local[k] = jac * quad.integrate([&](const Point2& r) { return std::pow(v.eval_reference(k, r), 2); });
  });
  double sum = 0.0;
  for (double x : local) {
    sum += x;
  }
  return sum;
}

struct ErrorNorm {
  double absolute = 0.0;
  double reference = 0.0;

  double relative() const { return reference > 0.0 ? absolute / reference : absolute; }
};

/// ||grad(u_ref - P u_h)|| against a solution on a refinement of u_h's mesh.
inline ErrorNorm h1_seminorm_error(const FeSolution& u_h, const FeSolution& reference) {
  const FeSolution p = prolongate(u_h, reference.space);
  return {std::sqrt(h1_seminorm_squared(*reference.space, reference.coefficients - p.coefficients)),
          std::sqrt(h1_seminorm_squared(*reference.space, reference.coefficients))};
}

inline ErrorNorm l2_error(const FeSolution& u_h, const FeSolution& reference) {
  const FeSolution p = prolongate(u_h, reference.space);
  return {std::sqrt(l2_norm_squared(*reference.space, reference.coefficients - p.coefficients)),
          std::sqrt(l2_norm_squared(*reference.space, reference.coefficients))};
}

using GradientFunction = std::function<Eigen::Vector2d(const Point2&)>;
using ScalarFunction = std::function<double(const Point2&)>;

/// ||grad(u - u_h)|| against an analytic gradient by a Gauss rule.
inline ErrorNorm h1_seminorm_error(const FeSolution& u_h, const GradientFunction& grad_u, int quad_degree) {
  const auto& mesh = *u_h.space->mesh();
  const auto quad = gauss_rule_triangle(quad_degree);
  std::vector<std::array<double, 2>> local(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    const auto& g = mesh.geometry(k);
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const Eigen::Vector2d exact = grad_u(g.to_physical(quad.points[q]));
      err += quad.weights[q] * (exact - u_h.gradient_reference(k, quad.points[q])).squaredNorm();
      ref += quad.weights[q] * exact.squaredNorm();
    }
    local[k] = {2.0 * g.area * err, 2.0 * g.area * ref};
  });
  ErrorNorm e;
  for (const auto& [err, ref] : local) {
    e.absolute += err;
    e.reference += ref;
  }
  e.absolute = std::sqrt(e.absolute);
  e.reference = std::sqrt(e.reference);
  return e;
}

inline ErrorNorm l2_error(const FeSolution& u_h, const ScalarFunction& u, int quad_degree) {
  const auto& mesh = *u_h.space->mesh();
  const auto quad = gauss_rule_triangle(quad_degree);
  std::vector<std::array<double, 2>> local(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t k) {
    const auto& g = mesh.geometry(k);
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const double exact = u(g.to_physical(quad.points[q]));
      err += quad.weights[q] * std::pow(exact - u_h.eval_reference(k, quad.points[q]), 2);
      ref += quad.weights[q] * exact * exact;
    }
    local[k] = {2.0 * g.area * err, 2.0 * g.area * ref};
  });
  ErrorNorm e;
  for (const auto& [err, ref] : local) {
    e.absolute += err;
    e.reference += ref;
  }
  e.absolute = std::sqrt(e.absolute);
  e.reference = std::sqrt(e.reference);
  return e;
}

/// sqrt(b^T A^{-1} b) with A the stiffness and b the exact load of g on a
/// refined P1 (or P2) space. Bounded above by ||g||_{H^{-1}}.
inline double discrete_hminus1(const PiecewisePolynomial<Mesh>& g, const FeSpace& fine_space,
                               const SparseMatrix* stiffness = nullptr) {
  const Eigen::VectorXd b = assemble_load_poly(fine_space, g);
  if (b.size() == 0 || b.squaredNorm() == 0.0) {
    return 0.0;
  }
  SparseMatrix owned;
  if (stiffness == nullptr) {
    owned = assemble_stiffness(fine_space);
    stiffness = &owned;
  }
  const Eigen::VectorXd x = cg_solve(*stiffness, b);
  return std::sqrt(std::max(0.0, b.dot(x)));
}

/// Matrix Market dumps.
inline void write_matrix_market(const std::string& path, const SparseMatrix& a) {
  if (!Eigen::saveMarket(a, path)) {
    throw std::runtime_error("cannot write " + path);
  }
}

inline void write_vector_market(const std::string& path, const Eigen::VectorXd& v) {
  if (!Eigen::saveMarketVector(v, path)) {
    throw std::runtime_error("cannot write " + path);
  }
}

/// CSV `dof,value`.
inline void write_solution_csv(std::ostream& out, const FeSolution& u) {
  out << "dof,value\n";
  for (Eigen::Index d = 0; d < u.coefficients.size(); ++d) {
    out << d << ',' << detail::format_double(u.coefficients(d)) << '\n';
  }
}

}  // namespace randproj
