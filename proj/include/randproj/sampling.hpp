#pragma once

// Uniform random points on simplices. Points are drawn on the reference
// element and mapped affinely to the physical element.

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "randproj/mesh.hpp"
#include "randproj/random.hpp"

namespace randproj {

enum class SamplingMethod { reflection, dirichlet };

/// Reflection for triangles, Dirichlet for segments.
inline SamplingMethod default_sampling_method(int dim) {
  return dim == 2 ? SamplingMethod::reflection : SamplingMethod::dirichlet;
}

/// Keeps (u, v) when u + v <= 1, otherwise reflects it through (1/2, 1/2).
inline Point2 reflect_into_triangle(double u, double v) {
  if (u + v <= 1.0) {
    return {u, v};
  }
  return {1.0 - u, 1.0 - v};
}

inline Point2 sample_ref_triangle_reflection(RandomStream& stream) {
  const double u = stream.uniform();
  const double v = stream.uniform();
  return reflect_into_triangle(u, v);
}

/// lambda_i = ln(U_i) / sum_j ln(U_j). The U_i must lie in (0, 1).
inline std::vector<double> dirichlet_from_uniforms(std::span<const double> uniforms) {
  std::vector<double> lambda(uniforms.size());
  double total = 0.0;
  for (std::size_t i = 0; i < uniforms.size(); ++i) {
    lambda[i] = std::log(uniforms[i]);
    total += lambda[i];
  }
  for (double& l : lambda) {
    l /= total;
  }
  return lambda;
}

/// Barycentric coordinates of a uniform point on the d-simplex, following
/// Dirichlet(1, ..., 1). Draws equal to 0 are discarded and redrawn.
inline std::vector<double> sample_ref_simplex_dirichlet(RandomStream& stream, int d) {
  if (d < 1) {
    throw std::invalid_argument("simplex dimension must be at least 1");
  }
  std::vector<double> u(static_cast<std::size_t>(d) + 1);
  for (double& x : u) {
    do {
      x = stream.uniform();
    } while (x == 0.0);
  }
  return dirichlet_from_uniforms(u);
}

/// One draw on the reference element of dimension Dim.
template <int Dim>
Point<Dim> sample_reference(RandomStream& stream, SamplingMethod method) {
  if constexpr (Dim == 2) {
    if (method == SamplingMethod::reflection) {
      return sample_ref_triangle_reflection(stream);
    }
    const auto lambda = sample_ref_simplex_dirichlet(stream, 2);
    return {lambda[1], lambda[2]};
  } else {
    if (method == SamplingMethod::reflection) {
      return Point<1>(stream.uniform());
    }
    const auto lambda = sample_ref_simplex_dirichlet(stream, 1);
    return Point<1>(lambda[1]);
  }
}

/// Points X_1..X_N in physical coordinates of one element.
template <int Dim>
struct SampleSet {
  std::size_t element = 0;
  std::vector<Point<Dim>> points;
};

/// Per-element sample counts: either one constant or an explicit list.
class SampleBudget {
public:
  explicit SampleBudget(std::size_t constant = 1) : constant_(constant) {
    if (constant == 0) {
      throw std::invalid_argument("sample counts must be positive");
    }
  }
  explicit SampleBudget(std::vector<std::size_t> per_element) : per_element_(std::move(per_element)) {
    for (std::size_t n : per_element_) {
      if (n == 0) {
        throw std::invalid_argument("sample counts must be positive");
      }
    }
  }

  std::size_t count(std::size_t element) const {
    return per_element_.empty() ? constant_ : per_element_.at(element);
  }

  std::size_t min_count(std::size_t n_elements) const {
    if (per_element_.empty()) {
      return constant_;
    }
    std::size_t result = per_element_.at(0);
    for (std::size_t k = 0; k < n_elements; ++k) {
      result = std::min(result, per_element_.at(k));
    }
    return result;
  }

private:
  std::size_t constant_ = 1;
  std::vector<std::size_t> per_element_;
};

template <class MeshT>
SampleSet<MeshT::dim> sample_element(const MeshT& mesh, std::size_t element, std::size_t count,
                                     RandomStream& stream,
                                     SamplingMethod method = default_sampling_method(MeshT::dim)) {
  if (count == 0) {
    throw std::invalid_argument("sample count must be positive");
  }
  SampleSet<MeshT::dim> set;
  set.element = element;
  set.points.reserve(count);
  const auto& geometry = mesh.geometry(element);
  for (std::size_t i = 0; i < count; ++i) {
    set.points.push_back(geometry.to_physical(sample_reference<MeshT::dim>(stream, method)));
  }
  return set;
}

/// Debug dump `element,i,x,y`.
template <int Dim>
void write_samples_csv(std::ostream& out, std::span<const SampleSet<Dim>> sets) {
  out << "element,i,x,y\n";
  for (const auto& set : sets) {
    for (std::size_t i = 0; i < set.points.size(); ++i) {
      out << set.element << ',' << i << ',' << detail::format_double(set.points[i](0)) << ','
          << (Dim > 1 ? detail::format_double(set.points[i](Dim - 1)) : std::string("0")) << '\n';
    }
  }
}

}  // namespace randproj
