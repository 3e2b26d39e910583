#pragma once

// Statistical checks of the randomized operators and the finite element
// pipeline. Each `measure_*` function returns raw empirical quantities; the
// `run_verify` report compares them with their targets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <ostream>
#include <string>
#include <vector>

#include "randproj/experiments.hpp"
#include "randproj/fem.hpp"
#include "randproj/mesh.hpp"
#include "randproj/projectors.hpp"
#include "randproj/rhs_library.hpp"
#include "randproj/stats.hpp"

namespace randproj::verify {

struct CheckResult {
  std::string id;
  double target = 0.0;
  double empirical = 0.0;
  double band = 0.0;
  bool pass = false;
  std::string detail;
};

/// One line per check: `id target empirical band PASS|FAIL detail`.
inline void write_report(std::ostream& out, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    out << c.id << ' ' << detail::format_double(c.target) << ' ' << detail::format_double(c.empirical) << ' '
        << detail::format_double(c.band) << ' ' << (c.pass ? "PASS" : "FAIL");
    if (!c.detail.empty()) {
      out << ' ' << c.detail;
    }
    out << '\n';
  }
}

/// Replicate summaries of the Monte Carlo cell means, one per element.
template <class Rhs>
std::vector<ReplicateSummary> measure_cell_means(const Rhs& f, const MeshPtr& mesh, std::size_t n,
                                                 std::size_t replicates, const StreamFactory& seeds) {
  return run_replicates_multi(
      [&](const StreamFactory& s) {
        const auto q = project_p0_mc<Mesh>(f, mesh, SampleBudget(n), s);
        return std::vector<double>(q.coefficients().data(), q.coefficients().data() + q.coefficients().size());
      },
      replicates, seeds);
}

struct SegmentBias {
  ReplicateSummary least_squares;  // integral of the degree-1 fit
  ReplicateSummary corrected;      // integral after the cell-mean correction
};

/// Degree-1 least squares of x^2 on (0, 1) from two uniform points, with and
/// without the Monte Carlo correction from one independent point.
inline SegmentBias measure_segment_bias(std::size_t replicates, const StreamFactory& seeds, std::size_t m = 2,
                                        std::size_t n = 1) {
  auto seg = std::make_shared<const IntervalMesh>(0.0, 1.0, 1);
  auto f = [](const Point<1>& x) { return x(0) * x(0); };
  const auto both = run_replicates_multi(
      [&](const StreamFactory& s) {
        const auto fit = project_pk_dls<IntervalMesh>(f, seg, 1, SampleBudget(m), s, default_sampling_method(1), false);
        const auto corr = project_pk_corrected<IntervalMesh>(f, seg, 1, SampleBudget(m), SampleBudget(n), s);
        return std::vector<double>{fit.projection.integral(), corr.integral()};
      },
      replicates, seeds);
  return {both[0], both[1]};
}

/// Largest pointwise deviation of the least-squares and corrected operators
/// from a random piecewise polynomial of degree k, with M = m + 2 points.
inline double measure_polynomial_reproduction(const MeshPtr& mesh, int k, const StreamFactory& seeds) {
  // random coefficients, drawn from the generic stream
  PiecewisePolynomial<Mesh> p(mesh, k);
  RandomStream coeff = seeds.stream(Purpose::generic, static_cast<std::uint32_t>(k));
  for (Eigen::Index i = 0; i < p.coefficients().size(); ++i) {
    p.coefficients().data()[i] = 2.0 * coeff.uniform() - 1.0;
  }
  // the operators only see point values
  auto locate = [&](const Point2& x) {
    for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
      const Point2 r = mesh->geometry(e).to_reference(x);
      if (r.x() >= -1e-12 && r.y() >= -1e-12 && r.x() + r.y() <= 1 + 1e-12) {
        return e;
      }
    }
    throw std::logic_error("point outside the mesh");
  };
  auto f = [&](const Point2& x) { return p.eval(locate(x), x); };
  const std::size_t m = static_cast<std::size_t>(p.dimension()) + 2;
  const auto fit = project_pk_dls<Mesh>(f, mesh, k, SampleBudget(m), seeds).projection;
  const auto corrected = project_pk_corrected<Mesh>(f, mesh, k, SampleBudget(m), SampleBudget(m), seeds);
  double worst = 0.0;
  RandomStream probe = seeds.stream(Purpose::generic, 1000u + static_cast<std::uint32_t>(k));
  for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
    for (int s = 0; s < 20; ++s) {
      const Point2 r = sample_ref_triangle_reflection(probe);
      const double exact = p.eval_reference(e, r);
      worst = std::max({worst, std::abs(fit.eval_reference(e, r) - exact),
                        std::abs(corrected.eval_reference(e, r) - exact)});
    }
  }
  return worst;
}

struct RateResult {
  std::vector<double> x;
  std::vector<ReplicateSummary> values;
  SlopeFit fit;
};

/// E ||Pi~_k f - Pi_k f||^2 over the mesh for a list of M.
template <class Rhs>
RateResult measure_least_squares_rate(const Rhs& f, const MeshPtr& mesh, int k, const std::vector<std::size_t>& ms,
                                      std::size_t replicates, const StreamFactory& seeds) {
  const auto exact = project_pk_composite(f, mesh, k, mesh->max_diameter() / 16, 20);
  RateResult result;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto s = run_replicates(
        [&](const StreamFactory& st) {
          const auto fit = project_pk_dls<Mesh>(f, mesh, k, SampleBudget(ms[i]), st, default_sampling_method(2), false);
          return (fit.projection - exact).l2_norm_squared();
        },
        replicates, seeds.with_level(static_cast<std::uint32_t>(i)));
    result.x.push_back(static_cast<double>(ms[i]));
    result.values.push_back(s);
  }
  std::vector<double> y;
  for (const auto& v : result.values) {
    y.push_back(v.mean);
  }
  result.fit = loglog_fit(result.x, y);
  return result;
}

/// Fixed setting of the H^{-1} experiments: coarse mesh, its exact cell
/// means, and a fine P1 space two refinements below.
struct HminusSetting {
  MeshPtr mesh;
  PiecewisePolynomial<Mesh> exact;
  FeSpacePtr coarse_space;
  FeSpacePtr fine_space;
  SparseMatrix coarse_stiffness;
  SparseMatrix fine_stiffness;
};

inline HminusSetting make_hminus_setting(const Rhs2& f, int levels = 3, int fine_extra = 2) {
  MeshPtr mesh = unit_square_mesh(1);
  for (int l = 0; l < levels; ++l) {
    mesh = uniform_refine(mesh);
  }
  MeshPtr fine = mesh;
  for (int l = 0; l < fine_extra; ++l) {
    fine = uniform_refine(fine);
  }
  HminusSetting s{mesh, project_pk_composite(f, mesh, 0, 1.0 / 512, 8), FeSpace::make(mesh, 1),
                  FeSpace::make(fine, 1), {}, {}};
  s.coarse_stiffness = assemble_stiffness(*s.coarse_space);
  s.fine_stiffness = assemble_stiffness(*s.fine_space);
  return s;
}

struct EnergySamples {
  std::vector<double> energy;    // ||grad(u_bar - u_hat)||^2 on the coarse space
  std::vector<double> hminus1;   // discrete H^{-1} norm squared of Pi_0 f - Pi^_0 f
};

/// Per replicate: energy of the solution perturbation and the discrete
/// H^{-1} norm of the data perturbation, both squared.
inline EnergySamples measure_energy_chain(const Rhs2& f, const HminusSetting& s, std::size_t n,
                                          std::size_t replicates, const StreamFactory& seeds) {
  const auto both = run_replicates_multi(
      [&](const StreamFactory& st) {
        const auto g = s.exact - project_p0_mc<Mesh>(f, s.mesh, SampleBudget(n), st);
        const Eigen::VectorXd bc = assemble_load_poly(*s.coarse_space, g);
        const double energy = bc.dot(cg_solve(s.coarse_stiffness, bc));
        const double h = discrete_hminus1(g, *s.fine_space, &s.fine_stiffness);
        return std::vector<double>{energy, h * h};
      },
      replicates, seeds);
  return {both[0].samples, both[1].samples};
}

/// Mean squared discrete H^{-1} norm of Pi_0 f - Pi^_0 f for each N.
inline RateResult measure_hminus1_scaling(const Rhs2& f, const HminusSetting& s, const std::vector<std::size_t>& ns,
                                          std::size_t replicates, const StreamFactory& seeds) {
  RateResult result;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto samples = measure_energy_chain(f, s, ns[i], replicates, seeds.with_level(static_cast<std::uint32_t>(i)));
    result.x.push_back(static_cast<double>(ns[i]));
    result.values.push_back(summarize(samples.hminus1));
  }
  std::vector<double> y;
  for (const auto& v : result.values) {
    y.push_back(v.mean);
  }
  result.fit = loglog_fit(result.x, y);
  return result;
}

/// Slope of the last `count` records of a convergence run, error vs ndof.
inline double tail_slope(const std::vector<ConvergenceRecord>& records, std::size_t count) {
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = records.size() - std::min(count, records.size()); i < records.size(); ++i) {
    x.push_back(static_cast<double>(records[i].ndof));
    y.push_back(records[i].h1_error);
  }
  return loglog_fit(x, y).slope;
}

/// Number of consecutive-level error ratios above `threshold`.
inline int count_stalls(const std::vector<ConvergenceRecord>& records, double threshold) {
  int count = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i - 1].h1_error > 0 && records[i].h1_error / records[i - 1].h1_error > threshold) {
      ++count;
    }
  }
  return count;
}

/// Longest run of consecutive ratios above `threshold`.
inline int longest_stall(const std::vector<ConvergenceRecord>& records, double threshold) {
  int best = 0;
  int run = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i - 1].h1_error > 0 && records[i].h1_error / records[i - 1].h1_error > threshold) {
      best = std::max(best, ++run);
    } else {
      run = 0;
    }
  }
  return best;
}

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959964) {
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct TailSlope {
  double slope = 0.0;
  double t_low = 0.0;
  double t_high = 0.0;
  bool in_requested_window = false;
};

/// Log-log slope of an exceedance curve over thresholds in [lo, hi] with
/// positive counts. When fewer than two such points exist, the fit uses the
/// thresholds with positive counts where the exceedance is below 1/2.
inline TailSlope tail_decay_slope(const TailCurve& curve, double lo, double hi) {
  auto fit_over = [&](auto&& keep) {
    std::vector<double> t;
    std::vector<double> p;
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
      if (curve.counts[i] > 0 && keep(i)) {
        t.push_back(curve.thresholds[i]);
        p.push_back(curve.exceedance[i]);
      }
    }
    TailSlope s;
    if (t.size() >= 2) {
      s.slope = loglog_fit(t, p).slope;
      s.t_low = t.front();
      s.t_high = t.back();
    } else {
      s.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
  };
  TailSlope s = fit_over([&](std::size_t i) { return curve.thresholds[i] >= lo && curve.thresholds[i] <= hi; });
  if (!std::isnan(s.slope)) {
    s.in_requested_window = true;
    return s;
  }
  return fit_over([&](std::size_t i) { return curve.exceedance[i] < 0.5; });
}

struct VerifyConfig {
  std::size_t replicates_scale_down = 1;  // divide replicate counts (quick runs)
};

/// The statistical checks with their library-side targets.
inline std::vector<CheckResult> run_verify(const StreamFactory& seeds, const VerifyConfig& config = {}) {
  const std::size_t div = std::max<std::size_t>(1, config.replicates_scale_down);
  std::vector<CheckResult> checks;
  const auto quad = gauss_rule_triangle(4);

  {
    auto mesh = unit_square_mesh(1);
    const auto exact = project_p0_exact<Mesh>(rhs::linear_x(), mesh, quad);
    const auto s = measure_cell_means(rhs::linear_x(), mesh, 1, 100000 / div, seeds.with_level(1));
    for (std::size_t e = 0; e < s.size(); ++e) {
      const double t = exact.coefficients()(0, static_cast<Eigen::Index>(e));
      checks.push_back({"pi0_unbiased_K" + std::to_string(e), t, s[e].mean, 4 * s[e].standard_error,
                        s[e].within(t), ""});
    }
  }
  {
    auto ref = single_triangle_mesh({0, 0}, {1, 0}, {0, 1});
    for (std::size_t n : {1u, 4u, 16u}) {
      const auto s = measure_cell_means(rhs::linear_x(), ref, n, 100000 / div,
                                      seeds.with_level(static_cast<std::uint32_t>(20 + n)));
      const double value = s[0].variance * static_cast<double>(n);
      const double target = 1.0 / 18.0;
      checks.push_back({"variance_identity_N" + std::to_string(n), target, value, 0.1 * target,
                        std::abs(value - target) <= 0.1 * target, ""});
    }
  }
  {
    const auto b = measure_segment_bias(1000000 / div, seeds.with_level(3));
    checks.push_back({"segment_bias", 0.25, b.least_squares.mean, 4 * b.least_squares.standard_error,
                      b.least_squares.within(0.25), ""});
    checks.push_back({"corrected_unbiased", 1.0 / 3, b.corrected.mean, 4 * b.corrected.standard_error,
                      b.corrected.within(1.0 / 3), ""});
  }
  {
    auto mesh = uniform_refine(unit_square_mesh(1));
    for (int k = 0; k <= 3; ++k) {
      const double err = measure_polynomial_reproduction(mesh, k, seeds.with_level(4));
      checks.push_back({"polynomial_reproduction_k" + std::to_string(k), 0.0, err, 1e-10, err <= 1e-10, ""});
    }
  }
  {
    const auto r = measure_least_squares_rate(rhs::rough_power(0.6), unit_square_mesh(2), 1, {29, 58, 116, 232},
                                              1000 / div, seeds.with_level(5));
    checks.push_back({"least_squares_rate", -1.0, r.fit.slope, 0.2, std::abs(r.fit.slope + 1.0) <= 0.2, ""});
  }
  {
    const Rhs2 f = rhs::oscillating(5);
    const auto setting = make_hminus_setting(f);
    const auto r = measure_hminus1_scaling(f, setting, {1, 4, 16, 64}, std::max<std::size_t>(2, 200 / div),
                                           seeds.with_level(6));
    checks.push_back({"hminus1_scaling", -1.0, r.fit.slope, 0.15, std::abs(r.fit.slope + 1.0) <= 0.15, ""});
    const auto chain = measure_energy_chain(f, setting, 1, std::max<std::size_t>(2, 200 / div), seeds.with_level(7));
    const double lhs = summarize(chain.energy).mean;
    const double rhs_mean = summarize(chain.hminus1).mean;
    checks.push_back({"energy_chain", rhs_mean, lhs, 1e-8, lhs <= rhs_mean + 1e-8, ""});
    const std::vector<double> alphas{2.0, 4.0, 10.0};
    for (const auto& m : markov_check(chain.energy, alphas)) {
      checks.push_back({"markov_alpha" + detail::format_double(m.alpha), m.bound, m.exceedance, m.allowance - m.bound,
                        m.pass, ""});
    }
  }
  return checks;
}

}  // namespace randproj::verify
