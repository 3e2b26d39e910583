// Minimal use of the library: Monte Carlo cell means of a rough f, an
// adaptive P1 solve driven by them, and the estimator history.

#include <cmath>
#include <cstdio>

#include "randproj/randproj.hpp"

using namespace randproj;

int main() {
  const StreamFactory seeds{SeedSpec{7}};
  const Rhs2 f = rhs::rough_power(0.6);

  // piecewise constant data from 4 uniform points per element
  auto mesh = uniform_refine(unit_square_mesh(2));
  const auto q = project_p0_mc<Mesh>(f, mesh, SampleBudget(4), seeds);
  std::printf("integral of the cell means: %.6f (exact 2 (1/2)^1.6 / 1.6 = %.6f)\n", q.integral(),
              2 * std::pow(0.5, 1.6) / 1.6);

  const DataFunction data = [&f](const FeSpace& space, const StreamFactory& s) {
    const auto cell_means = project_p0_mc<Mesh>(f, space.mesh(), SampleBudget(4), s);
    return DiscreteData{assemble_load_poly(space, cell_means), cell_means};
  };
  AdaptConfig config;
  config.target_ndof = 2000;
  for (const auto& r : adaptive_loop(unit_square_mesh(2), 1, data, config, seeds)) {
    std::printf("iter %2d  elements %5zu  ndof %5zu  eta %.4e\n", r.iteration, r.mesh->num_cells(),
                r.solution.ndof(), r.eta);
  }
  return 0;
}
