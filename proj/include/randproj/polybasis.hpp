#pragma once

// Orthonormal polynomial bases on the reference segment [0,1] and the
// reference triangle {(u,v): u,v >= 0, u+v <= 1}, exact monomial moments,
// Gauss rules and the Christoffel-type constant sup_x sum_j psi_j(x)^2.
//
// Orthonormality is with respect to the normalized inner product
// (1/|K_ref|) * integral over K_ref, so psi_1 == 1 and every other basis
// function has zero mean.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "randproj/mesh.hpp"

namespace randproj {

inline constexpr int kMaxBasisDegree = 10;

inline int polynomial_dimension(ElementKind kind, int k) {
  return kind == ElementKind::segment ? k + 1 : (k + 1) * (k + 2) / 2;
}

inline double reference_measure(ElementKind kind) { return kind == ElementKind::segment ? 1.0 : 0.5; }

namespace detail {

inline std::uint64_t binomial(int n, int r) {
  std::uint64_t result = 1;
  for (int i = 1; i <= r; ++i) {
    result = result * static_cast<std::uint64_t>(n - r + i) / static_cast<std::uint64_t>(i);
  }
  return result;
}

inline long double monomial_moment_ld(ElementKind kind, int a, int b) {
  if (kind == ElementKind::segment) {
    return 1.0L / static_cast<long double>(a + 1);
  }
  // a! b! / (a+b+2)! = 1 / (C(a+b, b) (a+b+1) (a+b+2))
  const long double denom = static_cast<long double>(binomial(a + b, b)) *
                            static_cast<long double>(a + b + 1) * static_cast<long double>(a + b + 2);
  return 1.0L / denom;
}

}  // namespace detail

/// Exact integral of x^a y^b over the reference element (b ignored on the
/// segment). On the triangle this is a! b! / (a+b+2)!.
inline double monomial_moment(ElementKind kind, int a, int b = 0) {
  if (a < 0 || b < 0) {
    throw std::invalid_argument("monomial exponents must be nonnegative");
  }
  return static_cast<double>(detail::monomial_moment_ld(kind, a, b));
}

/// Graded monomial exponents: total degree 0, 1, ..., k; within a degree,
/// decreasing powers of x.
inline std::vector<std::array<int, 2>> graded_exponents(ElementKind kind, int k) {
  std::vector<std::array<int, 2>> result;
  for (int d = 0; d <= k; ++d) {
    if (kind == ElementKind::segment) {
      result.push_back({d, 0});
    } else {
      for (int a = d; a >= 0; --a) {
        result.push_back({a, d - a});
      }
    }
  }
  return result;
}

class OrthonormalBasis {
public:
  OrthonormalBasis(ElementKind kind, int degree) : kind_(kind), degree_(degree) {
    if (degree < 0) {
      throw std::invalid_argument("basis degree must be nonnegative");
    }
    if (degree > kMaxBasisDegree) {
      throw std::invalid_argument("basis degree above 10 is not supported");
    }
    exponents_ = graded_exponents(kind, degree);
    dimension_ = static_cast<int>(exponents_.size());
    orthonormalize();
  }

  ElementKind kind() const { return kind_; }
  int degree() const { return degree_; }
  int dimension() const { return dimension_; }
  const std::vector<std::array<int, 2>>& exponents() const { return exponents_; }

  /// Row j holds the monomial coefficients of psi_j (lower triangular).
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }

  /// Writes psi_1(p), ..., psi_m(p) to out; `v` is ignored on the segment.
  void evaluate(double u, double v, std::span<double> out) const {
    std::array<double, kMaxBasisDegree + 1> pu{};
    std::array<double, kMaxBasisDegree + 1> pv{};
    pu[0] = 1.0;
    pv[0] = 1.0;
    for (int d = 1; d <= degree_; ++d) {
      pu[d] = pu[d - 1] * u;
      pv[d] = pv[d - 1] * v;
    }
    std::array<double, 66> mono{};
    for (int l = 0; l < dimension_; ++l) {
      mono[l] = pu[exponents_[l][0]] * pv[exponents_[l][1]];
    }
    for (int j = 0; j < dimension_; ++j) {
      double sum = 0.0;
      for (int l = 0; l <= j; ++l) {
        sum += coefficients_(j, l) * mono[l];
      }
      out[j] = sum;
    }
  }

  template <int Dim>
  Eigen::VectorXd operator()(const Point<Dim>& ref) const {
    Eigen::VectorXd out(dimension_);
    evaluate(ref(0), Dim > 1 ? ref(Dim - 1) : 0.0, std::span<double>(out.data(), out.size()));
    return out;
  }

  /// Values, gradients and Hessians of all basis functions at (u, v).
  /// Gradient and Hessian entries of the y-direction are zero on the segment.
  void evaluate_derivatives(double u, double v, Eigen::VectorXd& value, Eigen::MatrixXd& gradient,
                            std::vector<Eigen::Matrix2d>& hessian) const {
    const int m = dimension_;
    Eigen::VectorXd mono(m);
    Eigen::MatrixXd mono_grad(m, 2);
    std::vector<Eigen::Matrix2d> mono_hess(m);
    auto power = [](double x, int e) { return e < 0 ? 0.0 : std::pow(x, e); };
    for (int l = 0; l < m; ++l) {
      const int a = exponents_[l][0];
      const int b = exponents_[l][1];
      mono(l) = power(u, a) * power(v, b);
      mono_grad(l, 0) = a * power(u, a - 1) * power(v, b);
      mono_grad(l, 1) = b * power(u, a) * power(v, b - 1);
      mono_hess[l](0, 0) = a * (a - 1) * power(u, a - 2) * power(v, b);
      mono_hess[l](1, 1) = b * (b - 1) * power(u, a) * power(v, b - 2);
      mono_hess[l](0, 1) = a * b * power(u, a - 1) * power(v, b - 1);
      mono_hess[l](1, 0) = mono_hess[l](0, 1);
    }
    value = coefficients_ * mono;
    gradient = coefficients_ * mono_grad;
    hessian.assign(m, Eigen::Matrix2d::Zero());
    for (int j = 0; j < m; ++j) {
      for (int l = 0; l <= j; ++l) {
        hessian[j] += coefficients_(j, l) * mono_hess[l];
      }
    }
  }

  /// Normalized monomial Gram matrix (1/|K_ref|) int x^(a_i+a_j) y^(b_i+b_j).
  Eigen::MatrixXd monomial_gram() const { return monomial_gram_ld().cast<double>(); }

private:
  using MatrixLD = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorLD = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

  MatrixLD monomial_gram_ld() const {
    const long double scale = 1.0L / static_cast<long double>(reference_measure(kind_));
    MatrixLD gram(dimension_, dimension_);
    for (int i = 0; i < dimension_; ++i) {
      for (int j = 0; j < dimension_; ++j) {
        gram(i, j) = scale * detail::monomial_moment_ld(kind_, exponents_[i][0] + exponents_[j][0],
                                                        exponents_[i][1] + exponents_[j][1]);
      }
    }
    return gram;
  }

  // Modified Gram-Schmidt with one reorthogonalization pass, carried out in
  // extended precision on exact moments.
  void orthonormalize() {
    const MatrixLD gram = monomial_gram_ld();
    MatrixLD q = MatrixLD::Zero(dimension_, dimension_);
    for (int i = 0; i < dimension_; ++i) {
      VectorLD v = VectorLD::Zero(dimension_);
      v(i) = 1.0L;
      for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < i; ++j) {
          const long double proj = q.row(j).dot(gram * v);
          v -= proj * q.row(j).transpose();
        }
      }
      const long double norm = std::sqrt(v.dot(gram * v));
      q.row(i) = v.transpose() / norm;
    }
    coefficients_ = q.cast<double>();
  }

  ElementKind kind_;
  int degree_;
  int dimension_ = 0;
  std::vector<std::array<int, 2>> exponents_;
  Eigen::MatrixXd coefficients_;
};

inline OrthonormalBasis build_onb(ElementKind kind, int k) { return OrthonormalBasis(kind, k); }

template <int Dim>
Eigen::VectorXd eval_basis(const OrthonormalBasis& basis, const Point<Dim>& ref) {
  return basis(ref);
}

template <int Dim>
struct QuadratureRule {
  std::vector<Point<Dim>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return points.size(); }

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t q = 0; q < points.size(); ++q) {
      sum += weights[q] * f(points[q]);
    }
    return sum;
  }
};

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_01(int n) {
  std::vector<double> x(n);
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    long double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    long double dp = 0.0L;
    for (int iter = 0; iter < 100; ++iter) {
      long double p0 = 1.0L;
      long double p1 = z;
      for (int l = 2; l <= n; ++l) {
        const long double p2 = ((2 * l - 1) * z * p1 - (l - 1) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0L);
      const long double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-19L) {
        break;
      }
    }
    {
      long double p0 = 1.0L;
      long double p1 = z;
      for (int l = 2; l <= n; ++l) {
        const long double p2 = ((2 * l - 1) * z * p1 - (l - 1) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0L);
    }
    x[n - 1 - i] = static_cast<double>(0.5L * (1.0L + z));
    w[n - 1 - i] = static_cast<double>(1.0L / ((1.0L - z * z) * dp * dp));
  }
  return {x, w};
}

/// Gauss-Legendre rule on [0, 1] exact up to `degree`.
inline QuadratureRule<1> gauss_rule_segment(int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  auto [x, w] = gauss_legendre_01(n);
  QuadratureRule<1> rule;
  rule.degree = degree;
  for (int i = 0; i < n; ++i) {
    rule.points.push_back(Point<1>(x[i]));
    rule.weights.push_back(w[i]);
  }
  return rule;
}

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle exact up to
/// `degree`: (s, t) in [0,1]^2 maps to (s, t (1 - s)) with Jacobian 1 - s.
inline QuadratureRule<2> gauss_rule_triangle(int degree) {
  if (degree < 0 || degree > 40) {
    throw std::invalid_argument("triangle rule degree must lie in [0, 40]");
  }
  const int ns = std::max(1, (degree + 3) / 2);
  const int nt = std::max(1, (degree + 2) / 2);
  auto [xs, ws] = gauss_legendre_01(ns);
  auto [xt, wt] = gauss_legendre_01(nt);
  QuadratureRule<2> rule;
  rule.degree = degree;
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nt; ++j) {
      rule.points.emplace_back(xs[i], xt[j] * (1.0 - xs[i]));
      rule.weights.push_back(ws[i] * wt[j] * (1.0 - xs[i]));
    }
  }
  return rule;
}

/// Rule for the reference element of a mesh type.
template <class MeshT>
QuadratureRule<MeshT::dim> gauss_rule(int degree) {
  if constexpr (MeshT::dim == 1) {
    return gauss_rule_segment(degree);
  } else {
    return gauss_rule_triangle(degree);
  }
}

/// Christoffel-type constant sup_x sum_j psi_j(x)^2 over the reference
/// element: dense search on a barycentric grid with step 1/512, then Newton
/// refinement on the face (interior, edge or vertex) holding the best point.
inline double christoffel_lambda(const OrthonormalBasis& basis) {
  const int m = basis.dimension();
  std::vector<double> buffer(m);
  auto kernel = [&](double u, double v) {
    basis.evaluate(u, v, buffer);
    double s = 0.0;
    for (double x : buffer) {
      s += x * x;
    }
    return s;
  };
  constexpr int steps = 512;
  double best = -1.0;
  double bu = 0.0;
  double bv = 0.0;
  if (basis.kind() == ElementKind::segment) {
    for (int i = 0; i <= steps; ++i) {
      const double u = static_cast<double>(i) / steps;
      if (const double g = kernel(u, 0.0); g > best) {
        best = g;
        bu = u;
      }
    }
  } else {
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; i + j <= steps; ++j) {
        const double u = static_cast<double>(i) / steps;
        const double v = static_cast<double>(j) / steps;
        if (const double g = kernel(u, v); g > best) {
          best = g;
          bu = u;
          bv = v;
        }
      }
    }
  }

  Eigen::VectorXd val;
  Eigen::MatrixXd grad;
  std::vector<Eigen::Matrix2d> hess;
  auto derivatives = [&](double u, double v, Eigen::Vector2d& g, Eigen::Matrix2d& h) {
    basis.evaluate_derivatives(u, v, val, grad, hess);
    g = 2.0 * grad.transpose() * val;
    h = 2.0 * grad.transpose() * grad;
    for (int j = 0; j < m; ++j) {
      h += 2.0 * val(j) * hess[j];
    }
  };
  constexpr double eps = 1e-12;
  auto inside = [&](double u, double v) {
    if (basis.kind() == ElementKind::segment) {
      return u >= -eps && u <= 1 + eps;
    }
    return u >= -eps && v >= -eps && u + v <= 1 + eps;
  };

  // Newton along a line p(s) = origin + s * dir restricted to s in [0, 1].
  auto line_search = [&](Eigen::Vector2d origin, Eigen::Vector2d dir, double s) {
    for (int iter = 0; iter < 50; ++iter) {
      Eigen::Vector2d g;
      Eigen::Matrix2d h;
      const Eigen::Vector2d p = origin + s * dir;
      derivatives(p.x(), p.y(), g, h);
      const double d1 = g.dot(dir);
      const double d2 = dir.dot(h * dir);
      if (!(d2 < 0.0)) {
        break;
      }
      const double step = -d1 / d2;
      s = std::clamp(s + step, 0.0, 1.0);
      if (std::abs(step) < 1e-14) {
        break;
      }
    }
    const Eigen::Vector2d p = origin + s * dir;
    return kernel(p.x(), p.y());
  };

  double result = best;
  if (basis.kind() == ElementKind::segment) {
    result = std::max(result, line_search({0.0, 0.0}, {1.0, 0.0}, bu));
    return result;
  }
  const double tol = 0.5 / steps;
  const bool on_u0 = bu < tol;
  const bool on_v0 = bv < tol;
  const bool on_diag = bu + bv > 1.0 - tol;
  if (!on_u0 && !on_v0 && !on_diag) {
    Eigen::Vector2d p(bu, bv);
    for (int iter = 0; iter < 50; ++iter) {
      Eigen::Vector2d g;
      Eigen::Matrix2d h;
      derivatives(p.x(), p.y(), g, h);
      const Eigen::Vector2d step = -h.ldlt().solve(g);
      if (!step.allFinite() || !inside(p.x() + step.x(), p.y() + step.y())) {
        break;
      }
      p += step;
      if (step.norm() < 1e-14) {
        break;
      }
    }
    if (inside(p.x(), p.y())) {
      result = std::max(result, kernel(p.x(), p.y()));
    }
  }
  if (on_v0) {
    result = std::max(result, line_search({0.0, 0.0}, {1.0, 0.0}, bu));
  }
  if (on_u0) {
    result = std::max(result, line_search({0.0, 0.0}, {0.0, 1.0}, bv));
  }
  if (on_diag) {
    result = std::max(result, line_search({1.0, 0.0}, {-1.0, 1.0}, bv));
  }
  return result;
}

/// Lazily built, process-wide bases and Christoffel constants for degrees
/// 0..10. Entries never change once built.
class BasisTable {
public:
  static const OrthonormalBasis& basis(ElementKind kind, int k) {
    check(k);
    auto& slot = table(kind)[k];
    std::call_once(slot.basis_once, [&] { slot.basis = std::make_unique<OrthonormalBasis>(kind, k); });
    return *slot.basis;
  }

  static double lambda(ElementKind kind, int k) {
    const OrthonormalBasis& b = basis(kind, k);
    auto& slot = table(kind)[k];
    std::call_once(slot.lambda_once, [&] { slot.lambda = christoffel_lambda(b); });
    return slot.lambda;
  }

private:
  struct Slot {
    std::once_flag basis_once;
    std::once_flag lambda_once;
    std::unique_ptr<OrthonormalBasis> basis;
    double lambda = 0.0;
  };

  static void check(int k) {
    if (k < 0 || k > kMaxBasisDegree) {
      throw std::invalid_argument("basis degree must lie in [0, 10]");
    }
  }

  static std::array<Slot, kMaxBasisDegree + 1>& table(ElementKind kind) {
    static std::array<Slot, kMaxBasisDegree + 1> segment;
    static std::array<Slot, kMaxBasisDegree + 1> triangle;
    return kind == ElementKind::segment ? segment : triangle;
  }
};

}  // namespace randproj
