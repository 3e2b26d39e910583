#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "randproj/sampling.hpp"

using namespace randproj;

namespace {

RandomStream make_stream(std::uint64_t seed, std::uint32_t element = 0) {
  return RandomStream(SeedSpec{seed}, {Purpose::generic, 0, element, 0});
}

// Which of the four half-scale subtriangles of the reference triangle holds p:
// three corner triangles and the middle (inverted) one.
int subtriangle(const Point2& p) {
  if (p.x() >= 0.5) {
    return 1;
  }
  if (p.y() >= 0.5) {
    return 2;
  }
  if (p.x() + p.y() <= 0.5) {
    return 0;
  }
  return 3;
}

double chi_square_four_cells(SamplingMethod method, std::uint64_t seed, int n) {
  RandomStream s = make_stream(seed);
  std::array<int, 4> counts{};
  for (int i = 0; i < n; ++i) {
    counts[subtriangle(sample_reference<2>(s, method))]++;
  }
  const double expected = n / 4.0;
  double chi2 = 0.0;
  for (int c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
  }
  return chi2;
}

struct Moments {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

Moments moments(const std::vector<Point2>& pts) {
  Moments m;
  for (const auto& p : pts) {
    m.mean += p;
  }
  m.mean /= static_cast<double>(pts.size());
  for (const auto& p : pts) {
    m.cov += (p - m.mean) * (p - m.mean).transpose();
  }
  m.cov /= static_cast<double>(pts.size() - 1);
  return m;
}

}  // namespace

TEST(reflection, examples) {
  EXPECT_EQ(reflect_into_triangle(0.25, 0.5), Point2(0.25, 0.5));
  const Point2 r = reflect_into_triangle(0.8, 0.7);
  EXPECT_NEAR(r.x(), 0.2, 1e-15);
  EXPECT_NEAR(r.y(), 0.3, 1e-15);
}

TEST(reflection, mean_of_million_samples_is_centroid) {
  RandomStream s = make_stream(1);
  const int n = 1000000;
  std::vector<Point2> pts(n);
  for (auto& p : pts) {
    p = sample_ref_triangle_reflection(s);
    ASSERT_GE(p.x(), 0.0);
    ASSERT_GE(p.y(), 0.0);
    ASSERT_LE(p.x() + p.y(), 1.0);
  }
  const Moments m = moments(pts);
  // coordinate variance on the reference triangle is 1/18
  const double sigma = std::sqrt(1.0 / 18.0);
  EXPECT_NEAR(m.mean.x(), 1.0 / 3, 3 * sigma / std::sqrt(n));
  EXPECT_NEAR(m.mean.y(), 1.0 / 3, 3 * sigma / std::sqrt(n));
}

TEST(dirichlet, equal_uniforms_give_barycenter) {
  for (double u : {0.1, 0.5, 0.9}) {
    const std::vector<double> us{u, u, u};
    const auto lambda = dirichlet_from_uniforms(us);
    for (double l : lambda) {
      EXPECT_NEAR(l, 1.0 / 3, 1e-15);
    }
  }
}

TEST(dirichlet, rejects_bad_dimension) {
  RandomStream s = make_stream(2);
  EXPECT_THROW(sample_ref_simplex_dirichlet(s, 0), std::invalid_argument);
}

TEST(dirichlet, one_dimensional_marginal_is_uniform_by_ks) {
  RandomStream s = make_stream(3);
  const int n = 100000;
  std::vector<double> x(n);
  for (auto& v : x) {
    const auto lambda = sample_ref_simplex_dirichlet(s, 1);
    ASSERT_NEAR(lambda[0] + lambda[1], 1.0, 1e-15);
    v = lambda[1];
  }
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    d = std::max({d, (i + 1.0) / n - x[i], x[i] - static_cast<double>(i) / n});
  }
  // asymptotic Kolmogorov critical value at level 0.01
  EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(dirichlet, two_dimensional_mean_is_barycenter) {
  RandomStream s = make_stream(4);
  const int n = 100000;
  std::array<double, 3> sum{};
  for (int i = 0; i < n; ++i) {
    const auto lambda = sample_ref_simplex_dirichlet(s, 2);
    double total = 0.0;
    for (int j = 0; j < 3; ++j) {
      ASSERT_GE(lambda[j], 0.0);
      sum[j] += lambda[j];
      total += lambda[j];
    }
    ASSERT_NEAR(total, 1.0, 1e-14);
  }
  const double se = std::sqrt(1.0 / 18.0 / n);
  for (double v : sum) {
    EXPECT_NEAR(v / n, 1.0 / 3, 4 * se);
  }
}

TEST(uniformity, chi_square_on_four_subtriangles) {
  // chi-square with 3 degrees of freedom, level 0.01
  EXPECT_LT(chi_square_four_cells(SamplingMethod::reflection, 5, 100000), 11.345);
  EXPECT_LT(chi_square_four_cells(SamplingMethod::dirichlet, 6, 100000), 11.345);
}

TEST(uniformity, methods_are_statistically_indistinguishable) {
  const int n = 100000;
  RandomStream a = make_stream(7);
  RandomStream b = make_stream(8);
  std::vector<Point2> pa(n);
  std::vector<Point2> pb(n);
  for (int i = 0; i < n; ++i) {
    pa[i] = sample_reference<2>(a, SamplingMethod::reflection);
    pb[i] = sample_reference<2>(b, SamplingMethod::dirichlet);
  }
  const Moments ma = moments(pa);
  const Moments mb = moments(pb);
  for (int c = 0; c < 2; ++c) {
    const double se = std::sqrt((ma.cov(c, c) + mb.cov(c, c)) / n);
    EXPECT_LT(std::abs(ma.mean(c) - mb.mean(c)), 2.576 * se);
  }
  // second moments: var(x)=1/18, cov(x,y)=-1/36 for both; fourth-moment based SE
  for (int i = 0; i < 2; ++i) {
    for (int j = i; j < 2; ++j) {
      std::vector<double> za(n);
      std::vector<double> zb(n);
      for (int s = 0; s < n; ++s) {
        za[s] = (pa[s](i) - ma.mean(i)) * (pa[s](j) - ma.mean(j));
        zb[s] = (pb[s](i) - mb.mean(i)) * (pb[s](j) - mb.mean(j));
      }
      auto var = [n](const std::vector<double>& z, double mean) {
        double sq = 0.0;
        for (double v : z) {
          sq += (v - mean) * (v - mean);
        }
        return sq / (n - 1);
      };
      const double se = std::sqrt((var(za, ma.cov(i, j)) + var(zb, mb.cov(i, j))) / n);
      EXPECT_LT(std::abs(ma.cov(i, j) - mb.cov(i, j)), 2.576 * se);
    }
  }
}

TEST(sample_element, reference_element_matches_reference_sampler) {
  auto mesh = single_triangle_mesh({0, 0}, {1, 0}, {0, 1});
  RandomStream s1 = make_stream(9);
  RandomStream s2 = make_stream(9);
  const auto set = sample_element(*mesh, 0, 100, s1);
  for (const auto& p : set.points) {
    EXPECT_EQ(p, sample_reference<2>(s2, SamplingMethod::reflection));
  }
}

TEST(sample_element, scaled_element_mean) {
  auto mesh = single_triangle_mesh({0, 0}, {2, 0}, {0, 2});
  for (auto method : {SamplingMethod::reflection, SamplingMethod::dirichlet}) {
    RandomStream s = make_stream(10);
    const int n = 100000;
    const auto set = sample_element(*mesh, 0, n, s, method);
    const Moments m = moments(set.points);
    const double se = std::sqrt(4.0 / 18.0 / n);
    EXPECT_NEAR(m.mean.x(), 2.0 / 3, 4 * se);
    EXPECT_NEAR(m.mean.y(), 2.0 / 3, 4 * se);
  }
}

TEST(sample_element, points_lie_inside_element) {
  auto mesh = uniform_refine(uniform_refine(unit_square_mesh(2)));
  for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
    for (auto method : {SamplingMethod::reflection, SamplingMethod::dirichlet}) {
      RandomStream s = make_stream(11, static_cast<std::uint32_t>(k));
      const auto set = sample_element(*mesh, k, 200, s, method);
      const auto& g = mesh->geometry(k);
      for (const auto& p : set.points) {
        const Point2 r = g.to_reference(p);
        EXPECT_GE(r.x(), -1e-12);
        EXPECT_GE(r.y(), -1e-12);
        EXPECT_LE(r.x() + r.y(), 1.0 + 1e-12);
      }
    }
  }
}

TEST(sample_element, deterministic_given_seed) {
  auto mesh = unit_square_mesh(3);
  RandomStream a = make_stream(12, 5);
  RandomStream b = make_stream(12, 5);
  const auto sa = sample_element(*mesh, 5, 50, a);
  const auto sb = sample_element(*mesh, 5, 50, b);
  EXPECT_EQ(sa.points, sb.points);
  EXPECT_THROW(sample_element(*mesh, 5, 0, a), std::invalid_argument);
}

TEST(sample_budget, validates_counts) {
  EXPECT_THROW(SampleBudget(0), std::invalid_argument);
  EXPECT_THROW(SampleBudget(std::vector<std::size_t>{3, 0}), std::invalid_argument);
  SampleBudget b(std::vector<std::size_t>{5, 2, 7});
  EXPECT_EQ(b.count(2), 7u);
  EXPECT_EQ(b.min_count(3), 2u);
  EXPECT_EQ(SampleBudget(4).min_count(10), 4u);
}
