#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "randproj/stats.hpp"

using namespace randproj;

namespace {
const StreamFactory kSeeds{SeedSpec{99}};
}

TEST(run_replicates, constant_closure_has_zero_variance) {
  const auto s = run_replicates([](const StreamFactory&) { return 3.0; }, 10, kSeeds);
  EXPECT_EQ(s.mean, 3.0);
  EXPECT_EQ(s.variance, 0.0);
  EXPECT_EQ(s.standard_error, 0.0);
  EXPECT_THROW(run_replicates([](const StreamFactory&) { return 1.0; }, 1, kSeeds), std::invalid_argument);
}

TEST(run_replicates, uniform_moments) {
  const auto s = run_replicates(
      [](const StreamFactory& f) { return f.stream(Purpose::generic, 0).uniform(); }, 100000, kSeeds);
  EXPECT_TRUE(s.within(0.5));
  EXPECT_NEAR(s.variance, 1.0 / 12, 0.1 / 12);
  EXPECT_NEAR(s.standard_error, std::sqrt(s.variance / 100000), 1e-15);
}

TEST(run_replicates, summary_independent_of_threads) {
  auto draw = [](const StreamFactory& f) {
    RandomStream s = f.stream(Purpose::generic, 3);
    return s.uniform() * s.uniform();
  };
  set_thread_count(1);
  const auto a = run_replicates(draw, 1000, kSeeds);
  set_thread_count(3);
  const auto b = run_replicates(draw, 1000, kSeeds);
  set_thread_count(0);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.variance, b.variance);
}

TEST(run_replicates, errors_carry_replicate_index) {
  try {
    run_replicates(
        [](const StreamFactory& f) -> double {
          if (f.replicate == 5) {
            throw std::runtime_error("boom");
          }
          return 0.0;
        },
        10, kSeeds);
    FAIL() << "no throw";
  } catch (const ReplicateFailure& e) {
    EXPECT_EQ(e.replicate, 5u);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(markov_check, equal_samples) {
  const std::vector<double> samples(50, 2.0);
  const std::vector<double> alphas{2.0};
  const auto r = markov_check(samples, alphas);
  EXPECT_EQ(r[0].exceedance, 0.0);
  EXPECT_TRUE(r[0].pass);
  EXPECT_EQ(r[0].bound, 0.5);
}

TEST(markov_check, exponential_samples) {
  RandomStream s(SeedSpec{4}, {});
  std::vector<double> samples(100000);
  for (double& x : samples) {
    x = -std::log(1.0 - s.uniform());
  }
  const std::vector<double> alphas{2.0, 4.0, 10.0};
  const auto r = markov_check(samples, alphas);
  for (const auto& m : r) {
    EXPECT_TRUE(m.pass);
    EXPECT_NEAR(m.exceedance, std::exp(-m.alpha), 0.003);
  }
  EXPECT_LE(r[2].exceedance, 0.1);
  const std::vector<double> negative{1.0, -1.0};
  EXPECT_THROW(markov_check(negative, alphas), std::invalid_argument);
}

TEST(loglog_fit, recovers_power_law) {
  const std::vector<double> x{1, 2, 4, 8};
  const std::vector<double> y{3, 0.75, 0.1875, 0.046875};
  const auto fit = loglog_fit(x, y);
  EXPECT_NEAR(fit.slope, -2.0, 1e-12);
  EXPECT_NEAR(std::exp(fit.intercept), 3.0, 1e-12);
}

TEST(gram_tail, constant_basis_gives_identity) {
  const std::vector<std::size_t> ms{1, 5};
  const std::vector<double> ts{0.5, 2.0};
  const auto curves = gram_tail(ElementKind::triangle, 0, ms, ts, 50, kSeeds);
  for (const auto& c : curves) {
    EXPECT_EQ(c.exceedance[0], 1.0);
    EXPECT_EQ(c.exceedance[1], 0.0);
  }
}

TEST(gram_tail, more_samples_thinner_tail) {
  const std::vector<std::size_t> ms{3, 30};
  const auto ts = log_grid(10.0, 1000.0, 4);
  const auto curves = gram_tail(ElementKind::triangle, 1, ms, ts, 2000, kSeeds);
  ASSERT_EQ(curves.size(), 2u);
  for (const auto& c : curves) {
    for (std::size_t i = 1; i < c.exceedance.size(); ++i) {
      EXPECT_LE(c.exceedance[i], c.exceedance[i - 1]);
    }
    for (double p : c.exceedance) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
  EXPECT_LT(curves[1].exceedance[0], curves[0].exceedance[0]);
  EXPECT_THROW(gram_tail(ElementKind::triangle, 1, std::vector<std::size_t>{2}, ts, 10, kSeeds),
               std::invalid_argument);
}

TEST(gram_tail, empirical_gram_mean_is_identity) {
  for (int k = 0; k <= 2; ++k) {
    const auto& basis = BasisTable::basis(ElementKind::triangle, k);
    const int m = basis.dimension();
    const auto s = run_replicates_multi(
        [&](const StreamFactory& f) {
          RandomStream stream = f.stream(Purpose::generic, 0);
          std::vector<Point2> pts(10);
          for (auto& p : pts) {
            p = sample_reference<2>(stream, SamplingMethod::reflection);
          }
          const auto g = assemble_empirical_gram<2>(basis, pts, {});
          return std::vector<double>(g.matrix.data(), g.matrix.data() + g.matrix.size());
        },
        100000, kSeeds.with_level(static_cast<std::uint32_t>(k)));
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const auto& entry = s[static_cast<std::size_t>(j * m + i)];
        EXPECT_TRUE(entry.within(i == j ? 1.0 : 0.0) || entry.standard_error == 0.0)
            << k << ' ' << i << ' ' << j << ' ' << entry.mean;
      }
    }
  }
}

TEST(io, tail_and_replicate_csv) {
  TailCurve c;
  c.degree = 1;
  c.samples_per_matrix = 3;
  c.replicates = 10;
  c.thresholds = {10.0};
  c.exceedance = {0.5};
  c.counts = {5};
  std::ostringstream out;
  write_tail_csv(out, std::span<const TailCurve>(&c, 1));
  EXPECT_EQ(out.str(), "k,M,t,phat,R\n1,3,10,0.5,10\n");
  std::ostringstream r;
  write_replicates_csv(r, summarize({1.5, 2.0}));
  EXPECT_EQ(r.str(), "replicate,value\n0,1.5\n1,2\n");
}
