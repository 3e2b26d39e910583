#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "randproj/config.hpp"
#include "randproj/experiments.hpp"
#include "randproj/verification.hpp"

using namespace randproj;

namespace {

const StreamFactory kSeeds{SeedSpec{77}};

double fd_laplacian(double (*u)(const Point2&), const Point2& p, double h) {
  const Point2 ex(h, 0);
  const Point2 ey(0, h);
  return (u(p + ex) + u(p - ex) + u(p + ey) + u(p - ey) - 4 * u(p)) / (h * h);
}

}  // namespace

TEST(waterfall, rhs_matches_finite_differences) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.01, 0.99);
  double scale = 0.0;
  for (int i = 0; i < 1000; ++i) {
    scale = std::max(scale, std::abs(rhs::Waterfall::f({unif(gen), unif(gen)})));
  }
  gen.seed(5);
  for (int i = 0; i < 1000; ++i) {
    const Point2 p(unif(gen), unif(gen));
    // central differences: h^2 truncation against eps / h^2 rounding
    EXPECT_NEAR(rhs::Waterfall::f(p), -fd_laplacian(rhs::Waterfall::u, p, 3e-5), 1e-6 * scale);
    const double h = 1e-6;
    const Eigen::Vector2d g = rhs::Waterfall::grad(p);
    EXPECT_NEAR(g.x(), (rhs::Waterfall::u(p + Point2(h, 0)) - rhs::Waterfall::u(p - Point2(h, 0))) / (2 * h), 1e-7);
    EXPECT_NEAR(g.y(), (rhs::Waterfall::u(p + Point2(0, h)) - rhs::Waterfall::u(p - Point2(0, h))) / (2 * h), 1e-7);
  }
}

TEST(waterfall, vanishes_on_boundary) {
  for (double s = 0.0; s <= 1.0; s += 0.125) {
    EXPECT_EQ(rhs::Waterfall::u({s, 0.0}), 0.0);
    EXPECT_EQ(rhs::Waterfall::u({s, 1.0}), 0.0);
    EXPECT_EQ(rhs::Waterfall::u({0.0, s}), 0.0);
    EXPECT_EQ(rhs::Waterfall::u({1.0, s}), 0.0);
  }
}

TEST(rhs_library, lookup) {
  EXPECT_EQ(rhs::by_name("osc").name, "osc5");
  EXPECT_EQ(rhs::by_name("osc3").name, "osc3");
  EXPECT_DOUBLE_EQ(rhs::by_name("x")({0.25, 0.5}), 0.25);
  EXPECT_DOUBLE_EQ(rhs::by_name("osc0")({1.0 / 6, 0.3}), 1.0);
  EXPECT_THROW(rhs::by_name("nope"), ConfigError);
}

TEST(smoother_mode, parse_and_round_trip) {
  for (const std::string id : {"raw0", "raw10", "pi0-midpoint", "pi0-exact", "mc1", "mc20", "corrected1-M25-N10"}) {
    EXPECT_EQ(SmootherMode::parse(id).id(), id);
  }
  const auto c = SmootherMode::parse("corrected2-M40-N7");
  EXPECT_EQ(c.degree, 2);
  EXPECT_EQ(c.m, 40u);
  EXPECT_EQ(c.n, 7u);
  EXPECT_TRUE(c.randomized());
  EXPECT_FALSE(SmootherMode::parse("raw3").randomized());
  for (const std::string bad : {"mc", "mc0", "rawx", "corrected1-N3-M4", "pi1-exact", "mc-3"}) {
    EXPECT_THROW(SmootherMode::parse(bad), ConfigError) << bad;
  }
}

TEST(composite_rule, exact_for_piecewise_degree) {
  for (int s : {1, 2, 5}) {
    const auto rule = composite_rule_triangle(s, 4);
    double w = 0.0;
    for (double x : rule.weights) {
      w += x;
    }
    EXPECT_NEAR(w, 0.5, 1e-14);
    // int x^a y^b over the reference triangle = a! b! / (a + b + 2)!
    for (int a = 0; a <= 4; ++a) {
      for (int b = 0; a + b <= 4; ++b) {
        double q = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
          q += rule.weights[i] * std::pow(rule.points[i].x(), a) * std::pow(rule.points[i].y(), b);
        }
        const double exact = std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
        EXPECT_NEAR(q, exact, 1e-14) << s << ' ' << a << ' ' << b;
      }
    }
  }
}

TEST(discretize, affine_data_modes_agree) {
  auto mesh = uniform_refine(unit_square_mesh(2));
  auto space = FeSpace::make(mesh, 1);
  const Rhs2 f = rhs::affine();
  auto load = [&](const std::string& id) { return discretize_rhs(f, SmootherMode::parse(id), *space, kSeeds).load; };
  // cell means of an affine f are its centroid values
  EXPECT_LT((load("pi0-midpoint") - load("pi0-exact")).norm(), 1e-12);
  // P1 x affine is integrated exactly; degree-1 fits reproduce f
  const Eigen::VectorXd exact = load("raw10");
  EXPECT_LT((load("raw0") - exact).norm(), 1e-12);
  EXPECT_LT((load("corrected1-M5-N3") - exact).norm(), 1e-12);
  EXPECT_GT((load("mc1") - load("pi0-exact")).norm(), 1e-6);
}

TEST(discretize, randomized_load_is_linear_in_f) {
  auto mesh = uniform_refine(unit_square_mesh(2));
  auto space = FeSpace::make(mesh, 2);
  const Rhs2 f = rhs::oscillating(2);
  const Rhs2 g{[&](const Point2& p) { return 2.0 * f(p); }, "2f"};
  for (const std::string id : {"mc4", "corrected1-M10-N4"}) {
    const auto mode = SmootherMode::parse(id);
    const auto a = discretize_rhs(f, mode, *space, kSeeds);
    const auto b = discretize_rhs(g, mode, *space, kSeeds);
    EXPECT_LT((b.load - 2.0 * a.load).norm(), 1e-12 * b.load.norm()) << id;
  }
}

TEST(exp1, small_run_is_reproducible_and_converges) {
  Exp1Config config;
  config.levels = 3;
  config.reference_extra = 1;
  config.reference_samples = 20;
  config.modes = {"pi0-exact", "mc1"};
  const auto a = run_exp1(config, kSeeds);
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(a[0].records.size(), 4u);
  for (std::size_t l = 1; l < a[0].records.size(); ++l) {
    EXPECT_GT(a[0].records[l].ndof, a[0].records[l - 1].ndof);
  }
  EXPECT_LT(a[0].records.back().h1_error, a[0].records[1].h1_error);
  set_thread_count(3);
  const auto b = run_exp1(config, kSeeds);
  set_thread_count(0);
  for (std::size_t m = 0; m < a.size(); ++m) {
    for (std::size_t l = 0; l < a[m].records.size(); ++l) {
      EXPECT_EQ(a[m].records[l].h1_error, b[m].records[l].h1_error);
    }
  }
}

TEST(exp2, deterministic_waterfall_run) {
  Exp2Config config;
  config.adapt.target_ndof = 600;
  config.modes = {"raw0"};
  const auto runs = run_exp2(config, kSeeds);
  ASSERT_EQ(runs.size(), 1u);
  const auto& r = runs[0].records;
  ASSERT_GE(r.size(), 5u);
  for (std::size_t i = 1; i < r.size(); ++i) {
    EXPECT_GE(r[i].ndof, r[i - 1].ndof);
  }
  EXPECT_LE(r.back().ndof, 600u);
  EXPECT_LT(r.back().eta, r[2].eta);
  EXPECT_LT(r.back().h1_error, r[2].h1_error);
}

TEST(exp_output, error_interpolation_and_csv) {
  ModeRun run{"raw0", 0, {}};
  for (int i = 0; i < 3; ++i) {
    ConvergenceRecord rec;
    rec.step = i;
    rec.ndof = static_cast<std::size_t>(std::pow(10.0, i + 1));
    rec.h1_error = std::pow(10.0, -i);
    run.records.push_back(rec);
  }
  EXPECT_NEAR(*error_at_ndof(run.records, 100.0), 0.1, 1e-15);
  EXPECT_NEAR(*error_at_ndof(run.records, std::sqrt(1000.0) * 10), std::pow(10.0, -1.5), 1e-14);
  EXPECT_FALSE(error_at_ndof(run.records, 5.0).has_value());
  EXPECT_FALSE(error_at_ndof(run.records, 2000.0).has_value());
  std::ostringstream csv;
  write_convergence_csv(csv, run, 0.5, 42);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,ndof,eta,H1err,L2err,theta,seed");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 5), "0,10,");
  EXPECT_EQ(line.substr(line.size() - 7), ",0.5,42");
}

TEST(verify_helpers, wilson_and_tail_slope) {
  const auto [lo, hi] = verify::wilson_interval(0, 10000);
  EXPECT_EQ(lo, 0.0);
  EXPECT_NEAR(hi, 3.84e-4, 1e-5);
  const auto [lo2, hi2] = verify::wilson_interval(50, 100);
  EXPECT_LT(lo2, 0.5);
  EXPECT_GT(hi2, 0.5);
  TailCurve c;
  c.thresholds = {1, 10, 100, 1000};
  c.counts = {1000, 100, 10, 1};
  c.exceedance = {1.0, 0.1, 0.01, 0.001};
  const auto s = verify::tail_decay_slope(c, 10, 1000);
  EXPECT_TRUE(s.in_requested_window);
  EXPECT_NEAR(s.slope, -1.0, 1e-12);
  c.counts = {900, 0, 0, 0};
  c.exceedance = {0.9, 0.0, 0.0, 0.0};
  EXPECT_TRUE(std::isnan(verify::tail_decay_slope(c, 10, 1000).slope));
}

TEST(config, parse_and_validate) {
  std::istringstream in("# comment\nseed = 12\nlevels=4\nmodes = raw0, mc1\ntheta = 0.3 # trailing\n");
  const RunConfig c = parse_config(in);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.levels, 4);
  EXPECT_EQ(c.modes, (std::vector<std::string>{"raw0", "mc1"}));
  EXPECT_DOUBLE_EQ(c.theta, 0.3);
  EXPECT_NO_THROW(c.validate());
  std::istringstream bad_key("color = red\n");
  EXPECT_THROW(parse_config(bad_key), ConfigError);
  std::istringstream bad_value("levels = four\n");
  EXPECT_THROW(parse_config(bad_value), ConfigError);
  std::istringstream no_eq("levels\n");
  EXPECT_THROW(parse_config(no_eq), ConfigError);
  RunConfig t;
  t.theta = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(config, seed_precedence) {
  EXPECT_EQ(resolve_seed(std::nullopt, std::nullopt, nullptr), kDefaultSeed);
  EXPECT_EQ(resolve_seed(5, std::nullopt, nullptr), 5u);
  EXPECT_EQ(resolve_seed(5, std::nullopt, "9"), 9u);
  EXPECT_EQ(resolve_seed(5, 11, "9"), 11u);
  EXPECT_THROW(resolve_seed(5, std::nullopt, "abc"), ConfigError);
}

TEST(config, manifest_hash) {
  EXPECT_EQ(fnv1a(""), 14695981039346656037ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  RunConfig c;
  std::ostringstream a;
  std::ostringstream b;
  write_manifest(a, "exp1", c);
  write_manifest(b, "exp1", c);
  EXPECT_EQ(a.str(), b.str());
  c.seed = 1;
  std::ostringstream d;
  write_manifest(d, "exp1", c);
  EXPECT_NE(a.str(), d.str());
  EXPECT_NE(a.str().find("config_hash = "), std::string::npos);
}
