#pragma once

// Replicate runners and the small amount of statistics the verification
// harness relies on: confidence bands, Markov exceedance, log-log slopes and
// the empirical tail of ||G^{-1}|| for the empirical Gram matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "randproj/parallel.hpp"
#include "randproj/polybasis.hpp"
#include "randproj/projectors.hpp"
#include "randproj/random.hpp"
#include "randproj/sampling.hpp"

namespace randproj {

struct ReplicateSummary {
  std::size_t replicates = 0;
  std::vector<double> samples;
  double mean = 0.0;
  double variance = 0.0;
  double standard_error = 0.0;

  /// |mean - target| <= bands * standard_error.
  bool within(double target, double bands = 4.0) const {
    return std::abs(mean - target) <= bands * standard_error;
  }
};

inline ReplicateSummary summarize(std::vector<double> samples) {
  ReplicateSummary s;
  s.replicates = samples.size();
  if (s.replicates == 0) {
    return s;
  }
  double sum = 0.0;
  for (double x : samples) {
    sum += x;
  }
  s.mean = sum / static_cast<double>(s.replicates);
  if (s.replicates >= 2) {
    double sq = 0.0;
    for (double x : samples) {
      sq += (x - s.mean) * (x - s.mean);
    }
    s.variance = sq / static_cast<double>(s.replicates - 1);
    s.standard_error = std::sqrt(s.variance / static_cast<double>(s.replicates));
  }
  s.samples = std::move(samples);
  return s;
}

/// Thrown when a replicate fails; the original exception is nested.
struct ReplicateFailure : std::runtime_error {
  ReplicateFailure(std::size_t replicate, const std::string& what)
    : std::runtime_error("replicate " + std::to_string(replicate) + ": " + what), replicate(replicate) {}
  std::size_t replicate;
};

namespace detail {
template <class Fn>
auto run_one(Fn& experiment, const StreamFactory& seeds, std::size_t r) {
  try {
    return experiment(seeds.with_replicate(static_cast<std::uint32_t>(r)));
  } catch (const std::exception& e) {
    std::throw_with_nested(ReplicateFailure(r, e.what()));
  }
}
}  // namespace detail

/// Runs `experiment(seeds_r)` for r = 0..R-1, where seeds_r carries replicate
/// label r. The summary is reduced in replicate order and so does not depend
/// on the thread count.
template <class Fn>
ReplicateSummary run_replicates(Fn&& experiment, std::size_t replicates, const StreamFactory& seeds) {
  if (replicates < 2) {
    throw std::invalid_argument("run_replicates needs R >= 2");
  }
  std::vector<double> values(replicates);
  parallel_for(replicates, [&](std::size_t r) { values[r] = detail::run_one(experiment, seeds, r); });
  return summarize(std::move(values));
}

/// Vector-valued variant: one summary per output component.
template <class Fn>
std::vector<ReplicateSummary> run_replicates_multi(Fn&& experiment, std::size_t replicates,
                                                   const StreamFactory& seeds) {
  if (replicates < 2) {
    throw std::invalid_argument("run_replicates needs R >= 2");
  }
  std::vector<std::vector<double>> values(replicates);
  parallel_for(replicates, [&](std::size_t r) { values[r] = detail::run_one(experiment, seeds, r); });
  const std::size_t width = values.front().size();
  std::vector<ReplicateSummary> result;
  for (std::size_t c = 0; c < width; ++c) {
    std::vector<double> column(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
      column[r] = values[r].at(c);
    }
    result.push_back(summarize(std::move(column)));
  }
  return result;
}

struct MarkovResult {
  double alpha = 0.0;
  double exceedance = 0.0;
  double bound = 0.0;
  double allowance = 0.0;  // bound + 3 binomial standard errors
  bool pass = false;
};

/// Fraction of samples >= alpha * (sample mean) against 1/alpha plus three
/// binomial standard errors at p = 1/alpha.
inline std::vector<MarkovResult> markov_check(std::span<const double> samples, std::span<const double> alphas) {
  if (samples.empty()) {
    throw std::invalid_argument("markov_check needs samples");
  }
  double mean = 0.0;
  for (double x : samples) {
    if (x < 0.0) {
      throw std::invalid_argument("markov_check needs nonnegative samples");
    }
    mean += x;
  }
  mean /= static_cast<double>(samples.size());
  const double n = static_cast<double>(samples.size());
  std::vector<MarkovResult> results;
  for (double alpha : alphas) {
    MarkovResult r;
    r.alpha = alpha;
    const double threshold = alpha * mean;
    std::size_t count = 0;
    for (double x : samples) {
      if (x >= threshold && x > 0.0) {
        ++count;
      }
    }
    r.exceedance = static_cast<double>(count) / n;
    r.bound = 1.0 / alpha;
    r.allowance = r.bound + 3.0 * std::sqrt(r.bound * (1.0 - r.bound) / n);
    r.pass = r.exceedance <= r.allowance;
    results.push_back(r);
  }
  return results;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through (log x, log y).
inline SlopeFit loglog_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("loglog_fit needs at least two matching points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  SlopeFit fit;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

/// Empirical P(||G^{-1}|| >= t) for one sample count M.
struct TailCurve {
  ElementKind kind = ElementKind::triangle;
  int degree = 0;
  std::size_t samples_per_matrix = 0;
  std::size_t replicates = 0;
  std::vector<double> thresholds;
  std::vector<double> exceedance;
  std::vector<std::size_t> counts;
};

/// ||G^{-1}|| of one empirical Gram matrix on the reference element.
/// A matrix that fails the Cholesky pivot test counts as +infinity.
inline double sample_gram_inverse_norm(const OrthonormalBasis& basis, std::size_t samples, RandomStream& stream) {
  const auto draw = [&] {
    if (basis.kind() == ElementKind::segment) {
      RandomStream& s = stream;
      std::vector<Point<1>> pts(samples);
      for (auto& p : pts) {
        p = sample_reference<1>(s, default_sampling_method(1));
      }
      return assemble_empirical_gram<1>(basis, pts, {});
    }
    std::vector<Point<2>> pts(samples);
    for (auto& p : pts) {
      p = sample_reference<2>(stream, default_sampling_method(2));
    }
    return assemble_empirical_gram<2>(basis, pts, {});
  };
  const EmpiricalGram gram = draw();
  try {
    return inverse_norm_power_iteration(gram_cholesky(gram.matrix, 0));
  } catch (const SingularGram&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline std::vector<TailCurve> gram_tail(ElementKind kind, int k, std::span<const std::size_t> sample_counts,
                                        std::span<const double> thresholds, std::size_t replicates,
                                        const StreamFactory& seeds) {
  const OrthonormalBasis& basis = BasisTable::basis(kind, k);
  std::vector<double> sorted(thresholds.begin(), thresholds.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<TailCurve> curves;
  for (std::size_t index = 0; index < sample_counts.size(); ++index) {
    const std::size_t m_samples = sample_counts[index];
    if (m_samples < static_cast<std::size_t>(basis.dimension())) {
      throw std::invalid_argument("gram_tail needs M >= dim P_k");
    }
    std::vector<double> norms(replicates);
    const StreamFactory level_seeds = seeds.with_level(static_cast<std::uint32_t>(index));
    parallel_for(replicates, [&](std::size_t r) {
      RandomStream stream = level_seeds.with_replicate(static_cast<std::uint32_t>(r))
                                .stream(Purpose::gram_tail, static_cast<std::uint32_t>(m_samples));
      norms[r] = sample_gram_inverse_norm(basis, m_samples, stream);
    });
    TailCurve curve;
    curve.kind = kind;
    curve.degree = k;
    curve.samples_per_matrix = m_samples;
    curve.replicates = replicates;
    curve.thresholds = sorted;
    for (double t : sorted) {
      const auto count = static_cast<std::size_t>(
          std::count_if(norms.begin(), norms.end(), [t](double v) { return v >= t; }));
      curve.counts.push_back(count);
      curve.exceedance.push_back(static_cast<double>(count) / static_cast<double>(replicates));
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

/// CSV `k,M,t,phat,R`.
inline void write_tail_csv(std::ostream& out, std::span<const TailCurve> curves) {
  out << "k,M,t,phat,R\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
      out << c.degree << ',' << c.samples_per_matrix << ',' << detail::format_double(c.thresholds[i]) << ','
          << detail::format_double(c.exceedance[i]) << ',' << c.replicates << '\n';
    }
  }
}

/// CSV `replicate,value`.
inline void write_replicates_csv(std::ostream& out, const ReplicateSummary& summary) {
  out << "replicate,value\n";
  for (std::size_t r = 0; r < summary.samples.size(); ++r) {
    out << r << ',' << detail::format_double(summary.samples[r]) << '\n';
  }
}

/// Log-spaced grid with `points_per_decade` points per factor of ten.
inline std::vector<double> log_grid(double lo, double hi, int points_per_decade) {
  std::vector<double> grid;
  const int n = static_cast<int>(std::round(std::log10(hi / lo) * points_per_decade));
  for (int i = 0; i <= n; ++i) {
    grid.push_back(lo * std::pow(10.0, static_cast<double>(i) / points_per_decade));
  }
  return grid;
}

}  // namespace randproj
