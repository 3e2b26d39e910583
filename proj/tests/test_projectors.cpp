#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "randproj/projectors.hpp"
#include "randproj/stats.hpp"

using namespace randproj;

namespace {

const StreamFactory kSeeds{SeedSpec{2024}};

double fx(const Point2& p) { return p.x(); }

// Random piecewise polynomial of degree k, returned as a callable that looks
// up the element by barycentric test, together with its coefficient table in
// monomials of the physical coordinates per element.
struct RandomPiecewise {
  MeshPtr mesh;
  int k;
  std::vector<std::vector<double>> coeffs;  // per element, monomials x^a y^b with a+b <= k

  double on_element(std::size_t e, const Point2& p) const {
    double sum = 0.0;
    int idx = 0;
    for (int d = 0; d <= k; ++d) {
      for (int b = 0; b <= d; ++b) {
        sum += coeffs[e][idx++] * std::pow(p.x(), d - b) * std::pow(p.y(), b);
      }
    }
    return sum;
  }

  std::size_t locate(const Point2& p) const {
    for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
      const Point2 r = mesh->geometry(e).to_reference(p);
      if (r.x() >= -1e-12 && r.y() >= -1e-12 && r.x() + r.y() <= 1 + 1e-12) {
        return e;
      }
    }
    throw std::logic_error("point outside mesh");
  }

  double operator()(const Point2& p) const { return on_element(locate(p), p); }
};

RandomPiecewise random_piecewise(MeshPtr mesh, int k, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> c(-1, 1);
  RandomPiecewise r{mesh, k, {}};
  const int m = (k + 1) * (k + 2) / 2;
  for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
    std::vector<double> v(m);
    for (double& x : v) {
      x = c(rng);
    }
    r.coeffs.push_back(v);
  }
  return r;
}

}  // namespace

TEST(project_p0_exact, examples) {
  auto square = uniform_refine(unit_square_mesh(2));
  const auto quad = gauss_rule_triangle(4);
  const auto c = project_p0_exact<Mesh>([](const Point2&) { return 2.5; }, square, quad);
  for (std::size_t e = 0; e < square->num_cells(); ++e) {
    EXPECT_NEAR(c.coefficients()(0, e), 2.5, 1e-14);
  }
  auto ref = single_triangle_mesh({0, 0}, {1, 0}, {0, 1});
  EXPECT_NEAR(project_p0_exact<Mesh>(fx, ref, quad).coefficients()(0, 0), 1.0 / 3, 1e-15);
  EXPECT_NEAR(project_p0_exact<Mesh>(fx, square, quad).integral(), 0.5, 1e-14);
}

TEST(project_pk_exact, reproduces_polynomials) {
  auto mesh = uniform_refine(unit_square_mesh(2));
  for (int k = 0; k <= 4; ++k) {
    const auto p = random_piecewise(mesh, k, 100 + k);
    const auto quad = gauss_rule_triangle(2 * k);
    PiecewisePolynomial<Mesh> q(mesh, k);
    for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
      q.coefficients().col(e) =
          project_pk_exact<Mesh>([&](const Point2& x) { return p.on_element(e, x); }, mesh, k, quad)
              .coefficients()
              .col(e);
    }
    std::mt19937 rng(k);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
      for (int s = 0; s < 10; ++s) {
        Point2 r = reflect_into_triangle(u(rng), u(rng));
        const Point2 x = mesh->geometry(e).to_physical(r);
        EXPECT_NEAR(q.eval(e, x), p.on_element(e, x), 1e-12);
      }
    }
  }
}

TEST(project_pk_exact, residual_orthogonal_to_linears) {
  auto ref = single_triangle_mesh({0, 0}, {1, 0}, {0, 1});
  const auto quad = gauss_rule_triangle(10);
  auto f = [](const Point2& p) { return p.x() * p.x(); };
  const auto q = project_pk_exact<Mesh>(f, ref, 1, quad);
  for (int t = 0; t < 3; ++t) {
    const double r = quad.integrate([&](const Point2& p) {
      const double test = t == 0 ? 1.0 : (t == 1 ? p.x() : p.y());
      return (f(p) - q.eval(0, p)) * test;
    });
    EXPECT_NEAR(r, 0.0, 1e-12);
  }
}

TEST(project_pk_exact, degree_zero_agrees_with_cell_means) {
  auto mesh = uniform_refine(unit_square_mesh(1));
  const auto quad = gauss_rule_triangle(12);
  auto f = [](const Point2& p) { return std::exp(p.x()) * std::sin(3 * p.y()); };
  const auto a = project_pk_exact<Mesh>(f, mesh, 0, quad);
  const auto b = project_p0_exact<Mesh>(f, mesh, quad);
  EXPECT_LT((a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(piecewise_polynomial, parseval_and_integral) {
  auto mesh = uniform_refine(unit_square_mesh(2));
  PiecewisePolynomial<Mesh> q(mesh, 3);
  std::mt19937 rng(1);
  std::normal_distribution<double> n;
  for (Eigen::Index i = 0; i < q.coefficients().size(); ++i) {
    q.coefficients().data()[i] = n(rng);
  }
  const auto quad = gauss_rule_triangle(8);
  for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
    const auto& g = mesh->geometry(e);
    const double sq = quad.integrate([&](const Point2& r) { return std::pow(q.eval_reference(e, r), 2); }) * 2 * g.area;
    EXPECT_NEAR(q.l2_norm_squared(e), sq, 1e-11 * sq);
    const double in = quad.integrate([&](const Point2& r) { return q.eval_reference(e, r); }) * 2 * g.area;
    EXPECT_NEAR(q.integral(e), in, 1e-12);
  }
}

TEST(piecewise_polynomial, arithmetic_and_mismatch) {
  auto mesh = unit_square_mesh(2);
  PiecewisePolynomial<Mesh> a(mesh, 0);
  PiecewisePolynomial<Mesh> b(mesh, 2);
  a.coefficients().setConstant(1.0);
  b.coefficients().setConstant(2.0);
  const auto c = a + b;
  EXPECT_EQ(c.degree(), 2);
  EXPECT_DOUBLE_EQ(c.coefficients()(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(c.coefficients()(5, 0), 2.0);
  const auto d = 2.0 * (b - a);
  EXPECT_DOUBLE_EQ(d.coefficients()(0, 3), 2.0);
  PiecewisePolynomial<Mesh> other(unit_square_mesh(2), 0);
  EXPECT_THROW(a + other, MeshMismatch);
  EXPECT_THROW(b.raised_to(1), std::invalid_argument);
}

TEST(project_p0_mc, constant_is_exact) {
  auto mesh = unit_square_mesh(3);
  for (std::size_t n : {1u, 3u, 17u}) {
    const auto q = project_p0_mc<Mesh>([](const Point2&) { return -1.25; }, mesh, SampleBudget(n), kSeeds);
    EXPECT_TRUE((q.coefficients().array() == -1.25).all());
  }
}

TEST(project_p0_mc, unbiased_for_three_functions) {
  auto mesh = unit_square_mesh(1);
  const auto quad = gauss_rule_triangle(20);
  std::vector<std::function<double(const Point2&)>> fs{
      fx, [](const Point2& p) { return std::exp(p.x() + 2 * p.y()); },
      [](const Point2& p) { return std::sin(5 * p.x()) * p.y(); }};
  for (const auto& f : fs) {
    const auto exact = project_p0_exact<Mesh>(f, mesh, quad);
    const auto summaries = run_replicates_multi(
        [&](const StreamFactory& s) {
          const auto q = project_p0_mc<Mesh>(f, mesh, SampleBudget(1), s);
          return std::vector<double>{q.coefficients()(0, 0), q.coefficients()(0, 1)};
        },
        20000, kSeeds);
    for (int e = 0; e < 2; ++e) {
      EXPECT_TRUE(summaries[e].within(exact.coefficients()(0, e)))
          << summaries[e].mean << " vs " << exact.coefficients()(0, e) << " se " << summaries[e].standard_error;
    }
  }
}

TEST(project_p0_mc, variance_and_error_pythagoras) {
  auto ref = single_triangle_mesh({0, 0}, {1, 0}, {0, 1});
  const auto quad = gauss_rule_triangle(6);
  for (std::size_t n : {1u, 4u}) {
    const auto values = run_replicates_multi(
        [&](const StreamFactory& s) {
          const double c = project_p0_mc<Mesh>(fx, ref, SampleBudget(n), s).coefficients()(0, 0);
          const double err = quad.integrate([&](const Point2& p) { return (p.x() - c) * (p.x() - c); });
          return std::vector<double>{c, err};
        },
        40000, kSeeds.with_level(static_cast<std::uint32_t>(n)));
    // N var = (1/|K|) int (f - f_K)^2 = 2/36
    EXPECT_NEAR(values[0].variance * n, 1.0 / 18, 0.1 / 18);
    const double osc = 1.0 / 36;
    EXPECT_NEAR(values[1].mean, osc * (1 + 1.0 / n), 0.1 * osc * (1 + 1.0 / n));
  }
}

TEST(project_pk_dls, reproduces_piecewise_polynomials) {
  auto mesh = uniform_refine(unit_square_mesh(1));
  for (int k = 0; k <= 3; ++k) {
    const auto p = random_piecewise(mesh, k, 7 + k);
    const std::size_t m = static_cast<std::size_t>((k + 1) * (k + 2) / 2);
    const auto fit = project_pk_dls<Mesh>(p, mesh, k, SampleBudget(m + 2), kSeeds);
    const auto corrected = project_pk_corrected<Mesh>(p, mesh, k, SampleBudget(m + 2), SampleBudget(3), kSeeds);
    ASSERT_EQ(fit.diagnostics.size(), mesh->num_cells());
    for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
      EXPECT_GT(fit.diagnostics[e].lambda_min, 0.0);
      for (const Point2& r : {Point2(0.1, 0.2), Point2(0.6, 0.3), Point2(0, 0)}) {
        const Point2 x = mesh->geometry(e).to_physical(r);
        EXPECT_NEAR(fit.projection.eval(e, x), p.on_element(e, x), 1e-10);
        EXPECT_NEAR(corrected.eval(e, x), p.on_element(e, x), 1e-10);
      }
    }
  }
}

TEST(project_pk_dls, square_system_interpolates) {
  auto mesh = unit_square_mesh(1);
  auto f = [](const Point2& p) { return std::cos(4 * p.x()) + p.y() * p.y() * p.y(); };
  const auto fit = project_pk_dls<Mesh>(f, mesh, 2, SampleBudget(6), kSeeds);
  for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
    RandomStream s = kSeeds.stream(Purpose::least_squares, static_cast<std::uint32_t>(e));
    const auto pts = sample_element(*mesh, e, 6, s);
    for (const auto& x : pts.points) {
      EXPECT_NEAR(fit.projection.eval(e, x), f(x), 1e-10);
    }
  }
}

TEST(project_pk_dls, too_few_samples_and_singular_gram) {
  auto mesh = unit_square_mesh(1);
  EXPECT_THROW(project_pk_dls<Mesh>(fx, mesh, 1, SampleBudget(2), kSeeds), std::invalid_argument);
  Eigen::MatrixXd g = Eigen::MatrixXd::Ones(2, 2);
  try {
    gram_cholesky(g, 7);
    FAIL() << "no throw";
  } catch (const SingularGram& e) {
    EXPECT_EQ(e.element, 7u);
  }
  // collinear points on the segment y = 0 give a rank deficient linear Gram
  const auto& b = BasisTable::basis(ElementKind::triangle, 1);
  std::vector<Point2> pts{{0.1, 0}, {0.5, 0}, {0.9, 0}};
  const auto gram = assemble_empirical_gram<2>(b, pts, {});
  EXPECT_LT((gram.matrix - gram.matrix.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(gram_cholesky(gram.matrix, 0), SingularGram);
}

TEST(project_pk_dls, example_bias_on_segment) {
  auto seg = std::make_shared<const IntervalMesh>(0.0, 1.0, 1);
  auto f = [](const Point<1>& x) { return x(0) * x(0); };
  const auto biased = run_replicates(
      [&](const StreamFactory& s) { return project_pk_dls<IntervalMesh>(f, seg, 1, SampleBudget(2), s).projection.integral(); },
      200000, kSeeds);
  EXPECT_TRUE(biased.within(0.25)) << biased.mean << " se " << biased.standard_error;
  EXPECT_FALSE(biased.within(1.0 / 3));
  const auto corrected = run_replicates(
      [&](const StreamFactory& s) {
        return project_pk_corrected<IntervalMesh>(f, seg, 1, SampleBudget(2), SampleBudget(1), s).integral();
      },
      200000, kSeeds);
  EXPECT_TRUE(corrected.within(1.0 / 3)) << corrected.mean << " se " << corrected.standard_error;
}

TEST(project_pk_corrected, cell_means_unbiased) {
  auto mesh = unit_square_mesh(1);
  auto f = [](const Point2& p) { return std::exp(p.x()) * std::sin(p.y()); };
  const auto quad = gauss_rule_triangle(24);
  const auto exact = project_p0_exact<Mesh>(f, mesh, quad);
  const auto s = run_replicates_multi(
      [&](const StreamFactory& seeds) {
        const auto q = project_pk_corrected<Mesh>(f, mesh, 1, SampleBudget(3), SampleBudget(1), seeds);
        return std::vector<double>{q.integral(0) - exact.integral(0), q.integral(1) - exact.integral(1)};
      },
      20000, kSeeds);
  EXPECT_TRUE(s[0].within(0.0)) << s[0].mean << ' ' << s[0].standard_error;
  EXPECT_TRUE(s[1].within(0.0)) << s[1].mean << ' ' << s[1].standard_error;
}

TEST(project_pk_dls, thread_count_does_not_change_output) {
  auto mesh = uniform_refine(unit_square_mesh(4));
  auto f = [](const Point2& p) { return std::abs(std::sin(7 * p.x())) + p.y(); };
  set_thread_count(1);
  const auto a = project_pk_corrected<Mesh>(f, mesh, 2, SampleBudget(8), SampleBudget(5), kSeeds);
  set_thread_count(4);
  const auto b = project_pk_corrected<Mesh>(f, mesh, 2, SampleBudget(8), SampleBudget(5), kSeeds);
  set_thread_count(0);
  EXPECT_TRUE((a.coefficients().array() == b.coefficients().array()).all());
}

TEST(io, coefficient_and_diagnostic_csv) {
  auto mesh = unit_square_mesh(1);
  const auto fit = project_pk_dls<Mesh>(fx, mesh, 1, SampleBudget(5), kSeeds);
  std::ostringstream c;
  write_coefficients_csv(c, fit.projection);
  EXPECT_EQ(c.str().substr(0, 18), "element,c0,c1,c2\n0");
  std::ostringstream d;
  write_diagnostics_csv(d, fit.diagnostics);
  EXPECT_EQ(d.str().substr(0, 30), "element,lambda_min,norm_Ginv\n0");
}
