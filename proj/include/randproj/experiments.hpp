#pragma once

// Convergence experiments: uniform refinement with rough data (P1) and the
// adaptive P2 waterfall problem, each under several ways of discretizing f.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "randproj/adaptivity.hpp"
#include "randproj/errors.hpp"
#include "randproj/fem.hpp"
#include "randproj/mesh.hpp"
#include "randproj/polybasis.hpp"
#include "randproj/projectors.hpp"
#include "randproj/rhs_library.hpp"
#include "randproj/stats.hpp"

namespace randproj {

/// How the load vector is obtained from f.
struct SmootherMode {
  enum class Kind { raw, pi0_midpoint, pi0_exact, monte_carlo, corrected };

  Kind kind = Kind::raw;
  int bonus_order = 0;     // raw: Gauss exactness 2p + bonus_order
  std::size_t n = 1;       // Monte Carlo points per element
  std::size_t m = 25;      // least-squares points per element
  int degree = 1;          // corrected: polynomial degree

  /// Ids: raw<r>, pi0-midpoint, pi0-exact, mc<N>, corrected<k>-M<M>-N<N>.
  static SmootherMode parse(const std::string& id) {
    SmootherMode mode;
    auto number = [&](const std::string& s) {
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("bad smoother mode '" + id + "'");
      }
      return std::stoul(s);
    };
    if (id == "pi0-midpoint") {
      mode.kind = Kind::pi0_midpoint;
    } else if (id == "pi0-exact") {
      mode.kind = Kind::pi0_exact;
    } else if (id == "raw") {
      mode.kind = Kind::raw;
    } else if (id.rfind("raw", 0) == 0) {
      mode.kind = Kind::raw;
      mode.bonus_order = static_cast<int>(number(id.substr(3)));
    } else if (id.rfind("mc", 0) == 0) {
      mode.kind = Kind::monte_carlo;
      mode.n = number(id.substr(2));
    } else if (id.rfind("corrected", 0) == 0) {
      mode.kind = Kind::corrected;
      const auto m_pos = id.find("-M");
      const auto n_pos = id.find("-N");
      if (m_pos == std::string::npos || n_pos == std::string::npos || n_pos < m_pos) {
        throw ConfigError("bad smoother mode '" + id + "'");
      }
      mode.degree = static_cast<int>(number(id.substr(9, m_pos - 9)));
      mode.m = number(id.substr(m_pos + 2, n_pos - m_pos - 2));
      mode.n = number(id.substr(n_pos + 2));
    } else {
      throw ConfigError("unknown smoother mode '" + id + "'");
    }
    if (mode.n == 0 || mode.m == 0) {
      throw ConfigError("sample counts must be positive in '" + id + "'");
    }
    return mode;
  }

  std::string id() const {
    switch (kind) {
      case Kind::raw:
        return "raw" + std::to_string(bonus_order);
      case Kind::pi0_midpoint:
        return "pi0-midpoint";
      case Kind::pi0_exact:
        return "pi0-exact";
      case Kind::monte_carlo:
        return "mc" + std::to_string(n);
      case Kind::corrected:
        return "corrected" + std::to_string(degree) + "-M" + std::to_string(m) + "-N" + std::to_string(n);
    }
    return "?";
  }

  bool randomized() const { return kind == Kind::monte_carlo || kind == Kind::corrected; }
};

/// Composite rule: the reference triangle split into s^2 congruent pieces,
/// each carrying a Gauss rule of the given degree.
inline QuadratureRule<2> composite_rule_triangle(int subdivisions, int degree) {
  const auto base = gauss_rule_triangle(degree);
  QuadratureRule<2> rule;
  rule.degree = degree;
  const double h = 1.0 / subdivisions;
  const double w = h * h;
  for (int i = 0; i < subdivisions; ++i) {
    for (int j = 0; i + j < subdivisions; ++j) {
      const Point2 corner(i * h, j * h);
      for (std::size_t q = 0; q < base.size(); ++q) {
        rule.points.push_back(corner + h * base.points[q]);
        rule.weights.push_back(w * base.weights[q]);
        if (i + j + 1 < subdivisions) {
          // the flipped piece with corner at (i+1, j+1)
          rule.points.push_back(Point2((i + 1) * h, (j + 1) * h) - h * base.points[q]);
          rule.weights.push_back(w * base.weights[q]);
        }
      }
    }
  }
  return rule;
}

/// L2 projection onto degree k with per-element composite quadrature whose
/// pieces have diameter at most `piece_diameter`.
template <class Rhs>
PiecewisePolynomial<Mesh> project_pk_composite(const Rhs& f, const MeshPtr& mesh, int k, double piece_diameter,
                                               int degree) {
  PiecewisePolynomial<Mesh> result(mesh, k);
  const OrthonormalBasis& basis = result.basis();
  parallel_for(mesh->num_cells(), [&](std::size_t e) {
    const auto& g = mesh->geometry(e);
    const int s = std::max(1, static_cast<int>(std::ceil(g.diameter / piece_diameter)));
    const auto rule = composite_rule_triangle(s, degree);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(basis.dimension());
    for (std::size_t q = 0; q < rule.size(); ++q) {
      c += (2.0 * rule.weights[q] * f(g.to_physical(rule.points[q]))) * basis(rule.points[q]);
    }
    result.coefficients().col(static_cast<Eigen::Index>(e)) = c;
  });
  return result;
}

/// Cell values at the centroid.
template <class Rhs>
PiecewisePolynomial<Mesh> project_p0_midpoint(const Rhs& f, const MeshPtr& mesh) {
  PiecewisePolynomial<Mesh> result(mesh, 0);
  for (std::size_t e = 0; e < mesh->num_cells(); ++e) {
    result.coefficients()(0, static_cast<Eigen::Index>(e)) = f(mesh->centroid(e));
  }
  return result;
}

struct DataOptions {
  double exact_piece_diameter = 1.0 / 256;  // pi0-exact composite pieces
  int exact_piece_degree = 8;
};

/// Load vector and estimator data for one mode on one space.
inline DiscreteData discretize_rhs(const Rhs2& f, const SmootherMode& mode, const FeSpace& space,
                                   const StreamFactory& seeds, const DataOptions& options = {}) {
  const MeshPtr& mesh = space.mesh();
  const int p = space.degree();
  switch (mode.kind) {
    case SmootherMode::Kind::raw: {
      const int order = 2 * p + mode.bonus_order;
      return {assemble_load_quadrature(space, f, order), project_pk_exact<Mesh>(f, mesh, p, gauss_rule_triangle(order))};
    }
    case SmootherMode::Kind::pi0_midpoint: {
      auto q = project_p0_midpoint(f, mesh);
      return {assemble_load_poly(space, q), q};
    }
    case SmootherMode::Kind::pi0_exact: {
      auto q = project_pk_composite(f, mesh, 0, options.exact_piece_diameter, options.exact_piece_degree);
      return {assemble_load_poly(space, q), q};
    }
    case SmootherMode::Kind::monte_carlo: {
      auto q = project_p0_mc<Mesh>(f, mesh, SampleBudget(mode.n), seeds);
      return {assemble_load_poly(space, q), q};
    }
    case SmootherMode::Kind::corrected: {
      auto q = project_pk_corrected<Mesh>(f, mesh, mode.degree, SampleBudget(mode.m), SampleBudget(mode.n), seeds);
      return {assemble_load_poly(space, q), q};
    }
  }
  throw std::logic_error("unhandled smoother mode");
}

struct ConvergenceRecord {
  int step = 0;  // level or adaptive iteration
  std::size_t ndof = 0;
  double h1_error = 0.0;  // relative
  double l2_error = 0.0;  // relative
  double h1_absolute = 0.0;
  double l2_absolute = 0.0;
  double eta = 0.0;
  double seconds = 0.0;
};

struct ModeRun {
  std::string mode;
  int realization = 0;
  std::vector<ConvergenceRecord> records;
};

struct Exp1Config {
  int initial_n = 1;
  int levels = 6;  // T_0 .. T_levels
  int reference_extra = 2;
  std::size_t reference_samples = 100;
  std::string rhs = "osc";
  std::vector<std::string> modes{"raw0", "raw10", "pi0-midpoint", "pi0-exact", "mc1", "mc20"};
  int degree = 1;
  int realization = 0;
  DataOptions data;
};

/// Reference solution on T_{levels + reference_extra} with Monte Carlo cell
/// means, drawn from the dedicated reference stream.
inline FeSolution exp1_reference(const Exp1Config& config, const std::vector<MeshPtr>& meshes,
                                 const StreamFactory& seeds) {
  MeshPtr fine = meshes.back();
  for (int l = 0; l < config.reference_extra; ++l) {
    fine = uniform_refine(fine);
  }
  const Rhs2 f = rhs::by_name(config.rhs);
  auto space = FeSpace::make(fine, config.degree);
  const auto q = project_p0_mc<Mesh>(f, fine, SampleBudget(config.reference_samples),
                                     seeds.with_level(static_cast<std::uint32_t>(fine->level())),
                                     default_sampling_method(2), Purpose::reference);
  return solve_poisson(space, assemble_load_poly(*space, q));
}

/// Uniform refinement study. `on_record` is called after each level.
template <class Callback>
std::vector<ModeRun> run_exp1(const Exp1Config& config, const StreamFactory& seeds, Callback&& on_record) {
  std::vector<MeshPtr> meshes{unit_square_mesh(config.initial_n)};
  for (int l = 1; l <= config.levels; ++l) {
    meshes.push_back(uniform_refine(meshes.back()));
  }
  const FeSolution reference = exp1_reference(config, meshes, seeds);
  const Rhs2 f = rhs::by_name(config.rhs);
  std::vector<ModeRun> runs;
  for (const auto& id : config.modes) {
    const SmootherMode mode = SmootherMode::parse(id);
    ModeRun run{mode.id(), config.realization, {}};
    for (std::size_t l = 0; l < meshes.size(); ++l) {
      const auto start = std::chrono::steady_clock::now();
      auto space = FeSpace::make(meshes[l], config.degree);
      const StreamFactory level_seeds = seeds.with_level(static_cast<std::uint32_t>(l))
                                            .with_replicate(static_cast<std::uint32_t>(config.realization));
      const DiscreteData data = discretize_rhs(f, mode, *space, level_seeds, config.data);
      const FeSolution u = solve_poisson(space, data.load);
      const ErrorNorm h1 = h1_seminorm_error(u, reference);
      const ErrorNorm l2 = l2_error(u, reference);
      ConvergenceRecord rec;
      rec.step = static_cast<int>(l);
      rec.ndof = space->ndof();
      rec.h1_error = h1.relative();
      rec.l2_error = l2.relative();
      rec.h1_absolute = h1.absolute;
      rec.l2_absolute = l2.absolute;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      run.records.push_back(rec);
      on_record(run, rec);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

inline std::vector<ModeRun> run_exp1(const Exp1Config& config, const StreamFactory& seeds) {
  return run_exp1(config, seeds, [](const ModeRun&, const ConvergenceRecord&) {});
}

struct Exp2Config {
  int initial_n = 2;  // unit_square_mesh(1) has a single interior P2 dof
  int degree = 2;
  AdaptConfig adapt;
  std::vector<std::string> modes{"raw0", "corrected1-M25-N10"};
  int realizations = 3;  // for randomized modes
  int error_quad_degree = 12;
};

/// Adaptive waterfall runs. Deterministic modes run once, randomized modes
/// once per realization (replicate label).
template <class Callback>
std::vector<ModeRun> run_exp2(const Exp2Config& config, const StreamFactory& seeds, Callback&& on_record) {
  const Rhs2 f = rhs::Waterfall::rhs();
  const ExactSolution exact{rhs::Waterfall::u, rhs::Waterfall::grad, config.error_quad_degree};
  std::vector<ModeRun> runs;
  for (const auto& id : config.modes) {
    const SmootherMode mode = SmootherMode::parse(id);
    const int count = mode.randomized() ? config.realizations : 1;
    for (int r = 0; r < count; ++r) {
      const DataFunction data = [&](const FeSpace& space, const StreamFactory& s) {
        return discretize_rhs(f, mode, space, s);
      };
      const auto start = std::chrono::steady_clock::now();
      const auto adapt = adaptive_loop(unit_square_mesh(config.initial_n), config.degree, data, config.adapt,
                                       seeds.with_replicate(static_cast<std::uint32_t>(r)), exact);
      ModeRun run{mode.id(), r, {}};
      for (const auto& a : adapt) {
        ConvergenceRecord rec;
        rec.step = a.iteration;
        rec.ndof = a.solution.ndof();
        rec.h1_error = a.h1.relative();
        rec.l2_error = a.l2.relative();
        rec.h1_absolute = a.h1.absolute;
        rec.l2_absolute = a.l2.absolute;
        rec.eta = a.eta;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        run.records.push_back(rec);
        on_record(run, rec);
      }
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

inline std::vector<ModeRun> run_exp2(const Exp2Config& config, const StreamFactory& seeds) {
  return run_exp2(config, seeds, [](const ModeRun&, const ConvergenceRecord&) {});
}

/// Piecewise-linear interpolation of log(error) over log(ndof); nullopt
/// outside the sampled range.
inline std::optional<double> error_at_ndof(const std::vector<ConvergenceRecord>& records, double ndof) {
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const double a = static_cast<double>(records[i].ndof);
    const double b = static_cast<double>(records[i + 1].ndof);
    if (ndof >= a && ndof <= b && b > a) {
      const double t = (std::log(ndof) - std::log(a)) / (std::log(b) - std::log(a));
      return std::exp((1 - t) * std::log(records[i].h1_error) + t * std::log(records[i + 1].h1_error));
    }
  }
  if (!records.empty() && static_cast<double>(records.back().ndof) == ndof) {
    return records.back().h1_error;
  }
  return std::nullopt;
}

/// CSV `iter,ndof,eta,H1err,L2err,theta,seed` for one run.
inline void write_convergence_csv(std::ostream& out, const ModeRun& run, double theta, std::uint64_t seed,
                                  bool header = true) {
  if (header) {
    out << "iter,ndof,eta,H1err,L2err,theta,seed\n";
  }
  for (const auto& r : run.records) {
    out << r.step << ',' << r.ndof << ',' << detail::format_double(r.eta) << ','
        << detail::format_double(r.h1_error) << ',' << detail::format_double(r.l2_error) << ','
        << detail::format_double(theta) << ',' << seed << '\n';
  }
}

/// Gnuplot data: one block per run, columns ndof H1err L2err, blocks separated
/// by two blank lines.
inline void write_gnuplot_dat(std::ostream& out, const std::vector<ModeRun>& runs) {
  for (const auto& run : runs) {
    out << "# " << run.mode << " realization " << run.realization << "\n# ndof H1err L2err\n";
    for (const auto& r : run.records) {
      out << r.ndof << ' ' << detail::format_double(r.h1_error) << ' ' << detail::format_double(r.l2_error) << '\n';
    }
    out << "\n\n";
  }
}

}  // namespace randproj
