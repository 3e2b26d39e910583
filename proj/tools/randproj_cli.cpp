// randproj command line: experiments, statistical checks, Gram tails and
// single projections. Exit status 0 iff the command succeeded and, for
// verify, every check passed.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "randproj/config.hpp"
#include "randproj/experiments.hpp"
#include "randproj/verification.hpp"

namespace fs = std::filesystem;
using namespace randproj;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> levels;
  std::optional<double> theta;
  std::vector<std::string> modes;
  std::optional<int> threads;
  std::optional<std::size_t> replicates;
  std::optional<std::string> rhs;
  std::optional<std::size_t> target_ndof;
};

RunConfig resolve(const Flags& flags) {
  RunConfig c;
  std::optional<std::uint64_t> file_seed;
  if (!flags.config_path.empty()) {
    c = load_config(flags.config_path);
    file_seed = c.seed;
  }
  c.seed = resolve_seed(file_seed, flags.seed);
  if (flags.out) c.out = *flags.out;
  if (flags.levels) c.levels = *flags.levels;
  if (flags.theta) c.theta = *flags.theta;
  if (!flags.modes.empty()) c.modes = flags.modes;
  if (flags.threads) c.threads = *flags.threads;
  if (flags.replicates) c.replicates = *flags.replicates;
  if (flags.rhs) c.rhs = *flags.rhs;
  if (flags.target_ndof) c.target_ndof = *flags.target_ndof;
  c.validate();
  set_thread_count(c.threads);
  return c;
}

std::ofstream open_out(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out);
  std::ofstream f(fs::path(c.out) / name);
  if (!f) {
    throw std::runtime_error("cannot write " + (fs::path(c.out) / name).string());
  }
  return f;
}

void manifest(const RunConfig& c, const std::string& command) {
  auto f = open_out(c, "manifest.txt");
  write_manifest(f, command, c);
}

int cmd_exp1(const RunConfig& c) {
  Exp1Config config;
  config.levels = c.levels;
  if (c.initial_n) config.initial_n = c.initial_n;
  config.rhs = c.rhs;
  if (c.degree) config.degree = c.degree;
  if (!c.modes.empty()) config.modes = c.modes;
  if (c.replicates) config.reference_samples = c.replicates;
  const StreamFactory seeds{SeedSpec{c.seed}};
  const auto runs = run_exp1(config, seeds, [](const ModeRun& run, const ConvergenceRecord& r) {
    std::cerr << run.mode << " level " << r.step << " ndof " << r.ndof << " H1 " << r.h1_error << '\n';
  });
  for (const auto& run : runs) {
    auto f = open_out(c, "exp1_" + run.mode + ".csv");
    write_convergence_csv(f, run, 0.0, c.seed);
  }
  auto dat = open_out(c, "exp1.dat");
  write_gnuplot_dat(dat, runs);
  manifest(c, "exp1");
  return 0;
}

int cmd_exp2(const RunConfig& c) {
  Exp2Config config;
  if (c.initial_n) config.initial_n = c.initial_n;
  config.adapt.theta = c.theta;
  config.adapt.target_ndof = c.target_ndof;
  if (c.degree) config.degree = c.degree;
  if (!c.modes.empty()) config.modes = c.modes;
  if (c.replicates) config.realizations = static_cast<int>(c.replicates);
  const StreamFactory seeds{SeedSpec{c.seed}};
  const auto runs = run_exp2(config, seeds, [](const ModeRun& run, const ConvergenceRecord& r) {
    std::cerr << run.mode << " #" << run.realization << " iter " << r.step << " ndof " << r.ndof << " eta " << r.eta
              << '\n';
  });
  for (const auto& run : runs) {
    auto f = open_out(c, "exp2_" + run.mode + "_r" + std::to_string(run.realization) + ".csv");
    write_convergence_csv(f, run, c.theta, c.seed);
  }
  auto dat = open_out(c, "exp2.dat");
  write_gnuplot_dat(dat, runs);
  manifest(c, "exp2");
  return 0;
}

int cmd_verify(const RunConfig& c, std::size_t scale_down) {
  const auto checks = verify::run_verify(StreamFactory{SeedSpec{c.seed}}, {scale_down});
  verify::write_report(std::cout, checks);
  auto f = open_out(c, "verify.txt");
  verify::write_report(f, checks);
  manifest(c, "verify");
  bool ok = true;
  for (const auto& check : checks) {
    ok = ok && check.pass;
  }
  return ok ? 0 : 1;
}

int cmd_gram_tail(const RunConfig& c, int k, const std::vector<std::size_t>& ms, bool segment) {
  const auto thresholds = log_grid(1.0, 1000.0, 4);
  const auto curves = gram_tail(segment ? ElementKind::segment : ElementKind::triangle, k, ms, thresholds,
                                c.replicates ? c.replicates : 10000, StreamFactory{SeedSpec{c.seed}});
  auto f = open_out(c, "gram_tail.csv");
  write_tail_csv(f, curves);
  write_tail_csv(std::cout, curves);
  manifest(c, "gram-tail");
  return 0;
}

int cmd_project(const RunConfig& c, const std::string& mode_id, int n, int k) {
  const MeshPtr mesh = unit_square_mesh(n);
  const Rhs2 f = rhs::by_name(c.rhs);
  const StreamFactory seeds{SeedSpec{c.seed}};
  const SmootherMode mode = SmootherMode::parse(mode_id);
  PiecewisePolynomial<Mesh> q(mesh, 0);
  switch (mode.kind) {
    case SmootherMode::Kind::raw:
      q = project_pk_exact<Mesh>(f, mesh, k, gauss_rule_triangle(2 * k + mode.bonus_order));
      break;
    case SmootherMode::Kind::pi0_midpoint:
      q = project_p0_midpoint(f, mesh);
      break;
    case SmootherMode::Kind::pi0_exact:
      q = project_pk_composite(f, mesh, k, 1.0 / 256, 8);
      break;
    case SmootherMode::Kind::monte_carlo:
      q = project_p0_mc<Mesh>(f, mesh, SampleBudget(mode.n), seeds);
      break;
    case SmootherMode::Kind::corrected:
      q = project_pk_corrected<Mesh>(f, mesh, mode.degree, SampleBudget(mode.m), SampleBudget(mode.n), seeds);
      break;
  }
  auto out = open_out(c, "projection_" + mode.id() + ".csv");
  write_coefficients_csv(out, q);
  manifest(c, "project");
  std::cout << "integral " << detail::format_double(q.integral()) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"randproj: sampled data approximations for P1/P2 Poisson solves"};
  app.require_subcommand(1);
  Flags flags;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (overrides RANDPROJ_SEED and config)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--threads", flags.threads, "worker threads (0: RANDPROJ_THREADS or 1)");
    sub->add_option("--replicates", flags.replicates, "replicates / realizations / reference samples");
    sub->add_option("--rhs", flags.rhs, "rhs id: x, const, affine, osc<L>, rough, expsin, sinsin, waterfall");
  };

  auto* exp1 = app.add_subcommand("exp1", "uniform refinement with rough data");
  common(exp1);
  exp1->add_option("--levels", flags.levels, "finest level");
  exp1->add_option("--mode", flags.modes, "smoother modes")->delimiter(',');

  auto* exp2 = app.add_subcommand("exp2", "adaptive P2 waterfall problem");
  common(exp2);
  exp2->add_option("--theta", flags.theta, "bulk parameter");
  exp2->add_option("--mode", flags.modes, "smoother modes")->delimiter(',');
  exp2->add_option("--target-ndof", flags.target_ndof, "stop before exceeding this ndof");

  auto* verify_cmd = app.add_subcommand("verify", "statistical checks of the projections");
  common(verify_cmd);
  std::size_t scale_down = 1;
  verify_cmd->add_option("--scale-down", scale_down, "divide replicate counts (quick runs)")
      ->check(CLI::PositiveNumber);

  auto* tail = app.add_subcommand("gram-tail", "exceedance curve of the inverse empirical Gram norm");
  common(tail);
  int tail_k = 1;
  std::vector<std::size_t> tail_ms{3, 30};
  bool segment = false;
  tail->add_option("-k,--degree", tail_k, "polynomial degree")->check(CLI::Range(0, 10));
  tail->add_option("-M,--samples", tail_ms, "points per matrix")->delimiter(',');
  tail->add_flag("--segment", segment, "segment instead of triangle");

  auto* project = app.add_subcommand("project", "one projection of f on a uniform mesh");
  common(project);
  std::string mode_id = "mc1";
  int project_n = 4;
  int project_k = 0;
  project->add_option("--mode", mode_id, "smoother mode");
  project->add_option("-n", project_n, "squares per side")->check(CLI::PositiveNumber);
  project->add_option("-k,--degree", project_k, "degree for raw and pi0-exact")->check(CLI::Range(0, 10));

  CLI11_PARSE(app, argc, argv);
  try {
    const RunConfig c = resolve(flags);
    if (*exp1) return cmd_exp1(c);
    if (*exp2) return cmd_exp2(c);
    if (*verify_cmd) return cmd_verify(c, scale_down);
    if (*tail) return cmd_gram_tail(c, tail_k, tail_ms, segment);
    if (*project) return cmd_project(c, mode_id, project_n, project_k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
