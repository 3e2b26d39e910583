#pragma once

// Projections onto piecewise polynomials.
//
// Deterministic oracles (integrals by quadrature):
//   project_p0_exact   cell means
//   project_pk_exact   L2-orthogonal projection onto degree k
// Randomized operators (point evaluations of f only):
//   project_p0_mc         Monte Carlo cell means from N_K uniform points
//   project_pk_dls        discrete least-squares fit to M_K uniform points
//   project_pk_corrected  least-squares fit whose cell means are corrected by
//                         a Monte Carlo average of the residual on N_K
//                         independent points

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/mesh.hpp"
#include "randproj/parallel.hpp"
#include "randproj/polybasis.hpp"
#include "randproj/random.hpp"
#include "randproj/sampling.hpp"

namespace randproj {

/// Pointwise right-hand side.
template <int Dim>
struct RhsFunction {
  std::function<double(const Point<Dim>&)> evaluate;
  std::string name;

  double operator()(const Point<Dim>& x) const { return evaluate(x); }
};

using Rhs2 = RhsFunction<2>;

/// Per-element coefficients in the pushed-forward reference orthonormal
/// basis psi_K = psi_ref o F_K^{-1}. Column K of `coefficients` belongs to
/// element K. Because psi_1 == 1 and the other modes have zero mean, the
/// integral over K is |K| c_{K,1} and ||q||^2_{L2(K)} = |K| sum_j c_{K,j}^2.
template <class MeshT>
class PiecewisePolynomial {
public:
  using point_type = Point<MeshT::dim>;

  PiecewisePolynomial(std::shared_ptr<const MeshT> mesh, int degree)
    : mesh_(std::move(mesh)),
      degree_(degree),
      basis_(&BasisTable::basis(MeshT::kind, degree)),
      coefficients_(Eigen::MatrixXd::Zero(basis_->dimension(), mesh_->num_cells())) {}

  const std::shared_ptr<const MeshT>& mesh() const { return mesh_; }
  int degree() const { return degree_; }
  int dimension() const { return basis_->dimension(); }
  const OrthonormalBasis& basis() const { return *basis_; }

  Eigen::MatrixXd& coefficients() { return coefficients_; }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }

  double eval_reference(std::size_t element, const point_type& ref) const {
    std::array<double, 66> psi{};
    basis_->evaluate(ref(0), MeshT::dim > 1 ? ref(MeshT::dim - 1) : 0.0,
                     std::span<double>(psi.data(), basis_->dimension()));
    double sum = 0.0;
    for (int j = 0; j < basis_->dimension(); ++j) {
      sum += coefficients_(j, static_cast<Eigen::Index>(element)) * psi[j];
    }
    return sum;
  }

  /// Value at a physical point of `element`.
  double eval(std::size_t element, const point_type& x) const {
    return eval_reference(element, mesh_->geometry(element).to_reference(x));
  }

  double integral(std::size_t element) const {
    return mesh_->geometry(element).measure() * coefficients_(0, static_cast<Eigen::Index>(element));
  }

  double integral() const {
    double sum = 0.0;
    for (std::size_t k = 0; k < mesh_->num_cells(); ++k) {
      sum += integral(k);
    }
    return sum;
  }

  double l2_norm_squared(std::size_t element) const {
    return mesh_->geometry(element).measure() *
           coefficients_.col(static_cast<Eigen::Index>(element)).squaredNorm();
  }

  double l2_norm_squared() const {
    double sum = 0.0;
    for (std::size_t k = 0; k < mesh_->num_cells(); ++k) {
      sum += l2_norm_squared(k);
    }
    return sum;
  }

  /// Same function expressed in a higher degree basis. The graded basis is
  /// nested, so lower modes keep their coefficients.
  PiecewisePolynomial raised_to(int degree) const {
    if (degree < degree_) {
      throw std::invalid_argument("cannot lower the degree of a piecewise polynomial");
    }
    PiecewisePolynomial result(mesh_, degree);
    for (std::size_t k = 0; k < mesh_->num_cells(); ++k) {
      result.coefficients_.col(k).head(dimension()) = coefficients_.col(k);
    }
    return result;
  }

  PiecewisePolynomial& operator+=(const PiecewisePolynomial& other) { return axpy(1.0, other); }
  PiecewisePolynomial& operator-=(const PiecewisePolynomial& other) { return axpy(-1.0, other); }
  PiecewisePolynomial& operator*=(double s) {
    coefficients_ *= s;
    return *this;
  }

  friend PiecewisePolynomial operator+(PiecewisePolynomial a, const PiecewisePolynomial& b) { return a += b; }
  friend PiecewisePolynomial operator-(PiecewisePolynomial a, const PiecewisePolynomial& b) { return a -= b; }
  friend PiecewisePolynomial operator*(double s, PiecewisePolynomial a) { return a *= s; }

private:
  // Operands of different degree are combined in the larger degree.
  PiecewisePolynomial& axpy(double s, const PiecewisePolynomial& other) {
    if (other.mesh_ != mesh_) {
      throw MeshMismatch("piecewise polynomials live on different meshes");
    }
    if (other.degree_ > degree_) {
      *this = raised_to(other.degree_);
    }
    coefficients_.topRows(other.dimension()) += s * other.coefficients_;
    return *this;
  }

  std::shared_ptr<const MeshT> mesh_;
  int degree_;
  const OrthonormalBasis* basis_;
  Eigen::MatrixXd coefficients_;
};

/// Empirical Gram matrix (1/M) sum psi(Y_i) psi(Y_i)^T and moment vector
/// (1/M) sum f(Y_i) psi(Y_i) of the local normal equations.
struct EmpiricalGram {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd moments;
  std::size_t samples = 0;
};

/// Per-element conditioning of the least-squares problem.
struct GramDiagnostics {
  double lambda_min = 0.0;
  double norm_inverse = 0.0;
};

template <int Dim>
EmpiricalGram assemble_empirical_gram(const OrthonormalBasis& basis, std::span<const Point<Dim>> ref_points,
                                      std::span<const double> values) {
  const int m = basis.dimension();
  EmpiricalGram gram{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m), ref_points.size()};
  Eigen::VectorXd psi(m);
  for (std::size_t i = 0; i < ref_points.size(); ++i) {
    basis.evaluate(ref_points[i](0), Dim > 1 ? ref_points[i](Dim - 1) : 0.0,
                   std::span<double>(psi.data(), m));
    gram.matrix.noalias() += psi * psi.transpose();
    if (!values.empty()) {
      gram.moments += values[i] * psi;
    }
  }
  const double scale = 1.0 / static_cast<double>(ref_points.size());
  gram.matrix *= scale;
  gram.moments *= scale;
  return gram;
}

inline constexpr double kGramPivotTolerance = 1e-13;

/// Lower Cholesky factor; throws SingularGram when a pivot drops below
/// kGramPivotTolerance.
inline Eigen::MatrixXd gram_cholesky(const Eigen::MatrixXd& a, std::size_t element) {
  const Eigen::Index m = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index p = 0; p < j; ++p) {
      pivot -= l(j, p) * l(j, p);
    }
    if (!(pivot >= kGramPivotTolerance)) {
      throw SingularGram(element, pivot);
    }
    l(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < m; ++i) {
      double s = a(i, j);
      for (Eigen::Index p = 0; p < j; ++p) {
        s -= l(i, p) * l(j, p);
      }
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline Eigen::VectorXd cholesky_solve(const Eigen::MatrixXd& l, const Eigen::VectorXd& b) {
  const auto lower = l.triangularView<Eigen::Lower>();
  return lower.transpose().solve(lower.solve(b));
}

/// Spectral norm of G^{-1} by inverse power iteration on the Cholesky
/// factor (at most 20 iterations, relative tolerance 1e-10).
inline double inverse_norm_power_iteration(const Eigen::MatrixXd& cholesky_factor) {
  const Eigen::Index m = cholesky_factor.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(m) / std::sqrt(static_cast<double>(m));
  double estimate = 0.0;
  for (int iter = 0; iter < 20; ++iter) {
    Eigen::VectorXd y = cholesky_solve(cholesky_factor, x);
    const double next = x.dot(y);
    const double norm = y.norm();
    x = y / norm;
    if (iter > 0 && std::abs(next - estimate) <= 1e-10 * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  // One more Rayleigh quotient at the converged vector.
  return std::max(estimate, x.dot(cholesky_solve(cholesky_factor, x)));
}

template <class MeshT>
using MeshHandle = std::shared_ptr<const MeshT>;

template <class MeshT, class Rhs>
PiecewisePolynomial<MeshT> project_pk_exact(const Rhs& f, const MeshHandle<MeshT>& mesh, int k,
                                            const QuadratureRule<MeshT::dim>& quad) {
  PiecewisePolynomial<MeshT> result(mesh, k);
  const OrthonormalBasis& basis = result.basis();
  const int m = basis.dimension();
  // psi values at the quadrature points do not depend on the element
  Eigen::MatrixXd psi(m, quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    psi.col(q) = basis(quad.points[q]);
  }
  const double scale = 1.0 / reference_measure(MeshT::kind);
  parallel_for(mesh->num_cells(), [&](std::size_t e) {
    const auto& geometry = mesh->geometry(e);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      c += (scale * quad.weights[q] * f(geometry.to_physical(quad.points[q]))) * psi.col(q);
    }
    result.coefficients().col(e) = c;
  });
  return result;
}

template <class MeshT, class Rhs>
PiecewisePolynomial<MeshT> project_p0_exact(const Rhs& f, const MeshHandle<MeshT>& mesh,
                                            const QuadratureRule<MeshT::dim>& quad) {
  return project_pk_exact<MeshT>(f, mesh, 0, quad);
}

template <class MeshT, class Rhs>
PiecewisePolynomial<MeshT> project_p0_mc(const Rhs& f, const MeshHandle<MeshT>& mesh, const SampleBudget& budget,
                                         const StreamFactory& seeds,
                                         SamplingMethod method = default_sampling_method(MeshT::dim),
                                         Purpose purpose = Purpose::cell_average) {
  PiecewisePolynomial<MeshT> result(mesh, 0);
  parallel_for(mesh->num_cells(), [&](std::size_t e) {
    RandomStream stream = seeds.stream(purpose, static_cast<std::uint32_t>(e));
    const auto samples = sample_element(*mesh, e, budget.count(e), stream, method);
    double sum = 0.0;
    for (const auto& x : samples.points) {
      sum += f(x);
    }
    result.coefficients()(0, e) = sum / static_cast<double>(samples.points.size());
  });
  return result;
}

template <class MeshT>
struct LeastSquaresResult {
  PiecewisePolynomial<MeshT> projection;
  std::vector<GramDiagnostics> diagnostics;
};

/// Least-squares fit on one element from its samples; returns coefficients.
template <class MeshT, class Rhs>
Eigen::VectorXd fit_element(const Rhs& f, const MeshT& mesh, std::size_t element, const OrthonormalBasis& basis,
                            const SampleSet<MeshT::dim>& samples, GramDiagnostics* diagnostics) {
  const auto& geometry = mesh.geometry(element);
  std::vector<Point<MeshT::dim>> ref(samples.points.size());
  std::vector<double> values(samples.points.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ref[i] = geometry.to_reference(samples.points[i]);
    values[i] = f(samples.points[i]);
  }
  const EmpiricalGram gram = assemble_empirical_gram<MeshT::dim>(basis, ref, values);
  const Eigen::MatrixXd l = gram_cholesky(gram.matrix, element);
  if (diagnostics != nullptr) {
    diagnostics->norm_inverse = inverse_norm_power_iteration(l);
    diagnostics->lambda_min = 1.0 / diagnostics->norm_inverse;
  }
  Eigen::VectorXd c = cholesky_solve(l, gram.moments);
  // one step of corrected semi-normal equations against the sample residual
  const int m = basis.dimension();
  Eigen::VectorXd psi(m);
  Eigen::VectorXd correction = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    basis.evaluate(ref[i](0), MeshT::dim > 1 ? ref[i](MeshT::dim - 1) : 0.0, std::span<double>(psi.data(), m));
    correction += (values[i] - psi.dot(c)) * psi;
  }
  c += cholesky_solve(l, correction / static_cast<double>(ref.size()));
  return c;
}

template <class MeshT, class Rhs>
LeastSquaresResult<MeshT> project_pk_dls(const Rhs& f, const MeshHandle<MeshT>& mesh, int k,
                                         const SampleBudget& budget, const StreamFactory& seeds,
                                         SamplingMethod method = default_sampling_method(MeshT::dim),
                                         bool with_diagnostics = true) {
  LeastSquaresResult<MeshT> result{PiecewisePolynomial<MeshT>(mesh, k), {}};
  const OrthonormalBasis& basis = result.projection.basis();
  const auto m = static_cast<std::size_t>(basis.dimension());
  if (budget.min_count(mesh->num_cells()) < m) {
    throw std::invalid_argument("least squares needs at least dim P_k samples per element");
  }
  result.diagnostics.resize(with_diagnostics ? mesh->num_cells() : 0);
  parallel_for(mesh->num_cells(), [&](std::size_t e) {
    RandomStream stream = seeds.stream(Purpose::least_squares, static_cast<std::uint32_t>(e));
    const auto samples = sample_element(*mesh, e, budget.count(e), stream, method);
    result.projection.coefficients().col(e) =
        fit_element(f, *mesh, e, basis, samples, with_diagnostics ? &result.diagnostics[e] : nullptr);
  });
  return result;
}

/// Least-squares fit minus the Monte Carlo cell average of (fit - f) taken at
/// points independent of the fitting points. Only the constant mode moves.
template <class MeshT, class Rhs>
PiecewisePolynomial<MeshT> project_pk_corrected(const Rhs& f, const MeshHandle<MeshT>& mesh, int k,
                                                const SampleBudget& budget_fit, const SampleBudget& budget_mean,
                                                const StreamFactory& seeds,
                                                SamplingMethod method = default_sampling_method(MeshT::dim)) {
  auto fit = project_pk_dls(f, mesh, k, budget_fit, seeds, method, false);
  PiecewisePolynomial<MeshT> result = std::move(fit.projection);
  parallel_for(mesh->num_cells(), [&](std::size_t e) {
    RandomStream stream = seeds.stream(Purpose::correction, static_cast<std::uint32_t>(e));
    const auto samples = sample_element(*mesh, e, budget_mean.count(e), stream, method);
    double sum = 0.0;
    for (const auto& x : samples.points) {
      sum += result.eval(e, x) - f(x);
    }
    result.coefficients()(0, e) -= sum / static_cast<double>(samples.points.size());
  });
  return result;
}

/// CSV `element,c0,c1,...`.
template <class MeshT>
void write_coefficients_csv(std::ostream& out, const PiecewisePolynomial<MeshT>& q) {
  out << "element";
  for (int j = 0; j < q.dimension(); ++j) {
    out << ",c" << j;
  }
  out << '\n';
  for (std::size_t e = 0; e < q.mesh()->num_cells(); ++e) {
    out << e;
    for (int j = 0; j < q.dimension(); ++j) {
      out << ',' << detail::format_double(q.coefficients()(j, e));
    }
    out << '\n';
  }
}

/// CSV `element,lambda_min,norm_Ginv`.
inline void write_diagnostics_csv(std::ostream& out, std::span<const GramDiagnostics> diagnostics) {
  out << "element,lambda_min,norm_Ginv\n";
  for (std::size_t e = 0; e < diagnostics.size(); ++e) {
    out << e << ',' << detail::format_double(diagnostics[e].lambda_min) << ','
        << detail::format_double(diagnostics[e].norm_inverse) << '\n';
  }
}

}  // namespace randproj
