#pragma once

// Conforming triangulations of polygonal domains with red refinement and
// newest-vertex bisection, plus a uniform interval mesh for 1D least squares.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "randproj/errors.hpp"

namespace randproj {

enum class ElementKind { segment, triangle };

template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

using Point2 = Point<2>;

/// Affine map from the reference triangle {(u,v): u,v >= 0, u+v <= 1}.
struct ElementGeometry {
  Eigen::Matrix2d affine_matrix;
  Point2 offset;
  double area = 0.0;
  double diameter = 0.0;
  Eigen::Matrix2d inverse_matrix;

  Point2 to_physical(const Point2& ref) const { return affine_matrix * ref + offset; }
  Point2 to_reference(const Point2& x) const { return inverse_matrix * (x - offset); }
  double measure() const { return area; }
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) {
    std::swap(a, b);
  }
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

inline std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

}  // namespace detail

class Mesh;
using MeshPtr = std::shared_ptr<const Mesh>;

/// Immutable 2D simplicial mesh.
///
/// Local edge j of a triangle is the edge opposite local vertex j. The
/// refinement edge index r selects the edge bisected by newest-vertex
/// bisection; vertex r is the newest vertex.
class Mesh {
public:
  static constexpr int dim = 2;
  static constexpr ElementKind kind = ElementKind::triangle;
  using point_type = Point2;
  using geometry_type = ElementGeometry;

  Mesh(std::vector<Point2> vertices, std::vector<std::array<int, 3>> triangles,
       std::vector<int> refinement_edges, int level = 0)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      refinement_edges_(std::move(refinement_edges)),
      level_(level) {
    if (refinement_edges_.empty()) {
      refinement_edges_ = longest_edges();
    }
    if (refinement_edges_.size() != triangles_.size()) {
      throw MeshError("refinement edge count does not match triangle count");
    }
    build();
  }

  std::size_t num_cells() const { return triangles_.size(); }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<int>& refinement_edges() const { return refinement_edges_; }
  int level() const { return level_; }

  const ElementGeometry& geometry(std::size_t k) const { return geometry_[k]; }

  /// Unique edges as sorted vertex pairs.
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  /// Edge index of local edge j (opposite local vertex j) of each triangle.
  const std::vector<std::array<int, 3>>& triangle_edges() const { return triangle_edges_; }
  /// The one or two triangles sharing an edge; -1 marks the boundary side.
  const std::vector<std::array<int, 2>>& edge_triangles() const { return edge_triangles_; }
  bool is_boundary_edge(std::size_t e) const { return edge_triangles_[e][1] < 0; }

  /// Boundary edges as sorted vertex pairs.
  std::set<std::pair<int, int>> boundary_edges() const {
    std::set<std::pair<int, int>> result;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (is_boundary_edge(e)) {
        result.emplace(edges_[e][0], edges_[e][1]);
      }
    }
    return result;
  }

  /// Mesh this one was refined from, or null for an initial mesh.
  const MeshPtr& coarser() const { return coarser_; }
  /// Parent triangle in `coarser()` for every triangle.
  const std::vector<int>& parents() const { return parents_; }

  double total_area() const {
    double sum = 0.0;
    for (const auto& g : geometry_) {
      sum += g.area;
    }
    return sum;
  }

  double max_diameter() const {
    double h = 0.0;
    for (const auto& g : geometry_) {
      h = std::max(h, g.diameter);
    }
    return h;
  }

  Point2 centroid(std::size_t k) const {
    const auto& t = triangles_[k];
    return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
  }

  /// Attaches refinement history; used by the refinement routines.
  Mesh with_history(MeshPtr coarser, std::vector<int> parents) && {
    coarser_ = std::move(coarser);
    parents_ = std::move(parents);
    return std::move(*this);
  }

private:
  std::vector<int> longest_edges() const {
    std::vector<int> result(triangles_.size(), 0);
    for (std::size_t k = 0; k < triangles_.size(); ++k) {
      const auto& t = triangles_[k];
      double best = -1.0;
      for (int j = 0; j < 3; ++j) {
        const double len = (vertices_[t[(j + 1) % 3]] - vertices_[t[(j + 2) % 3]]).norm();
        if (len > best * (1.0 + 1e-12)) {
          best = len;
          result[k] = j;
        }
      }
    }
    return result;
  }

  void build() {
    geometry_.resize(triangles_.size());
    for (std::size_t k = 0; k < triangles_.size(); ++k) {
      const auto& t = triangles_[k];
      for (int j = 0; j < 3; ++j) {
        if (t[j] < 0 || static_cast<std::size_t>(t[j]) >= vertices_.size()) {
          throw MeshError("triangle " + std::to_string(k) + " references a missing vertex");
        }
      }
      if (refinement_edges_[k] < 0 || refinement_edges_[k] > 2) {
        throw MeshError("refinement edge index out of range on triangle " + std::to_string(k));
      }
      ElementGeometry& g = geometry_[k];
      const Point2& p0 = vertices_[t[0]];
      const Point2& p1 = vertices_[t[1]];
      const Point2& p2 = vertices_[t[2]];
      g.affine_matrix.col(0) = p1 - p0;
      g.affine_matrix.col(1) = p2 - p0;
      g.offset = p0;
      const double det = g.affine_matrix.determinant();
      if (!(det > 0.0)) {
        throw MeshError("triangle " + std::to_string(k) + " is not positively oriented");
      }
      g.area = 0.5 * det;
      g.inverse_matrix = g.affine_matrix.inverse();
      g.diameter = std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
    }

    std::unordered_map<std::uint64_t, int> index;
    index.reserve(triangles_.size() * 2);
    triangle_edges_.resize(triangles_.size());
    for (std::size_t k = 0; k < triangles_.size(); ++k) {
      const auto& t = triangles_[k];
      for (int j = 0; j < 3; ++j) {
        const int a = t[(j + 1) % 3];
        const int b = t[(j + 2) % 3];
        const auto [it, inserted] = index.try_emplace(detail::edge_key(a, b), static_cast<int>(edges_.size()));
        if (inserted) {
          edges_.push_back({std::min(a, b), std::max(a, b)});
          edge_triangles_.push_back({static_cast<int>(k), -1});
        } else {
          auto& owners = edge_triangles_[it->second];
          if (owners[1] >= 0) {
            throw MeshError("edge shared by more than two triangles");
          }
          owners[1] = static_cast<int>(k);
        }
        triangle_edges_[k][j] = it->second;
      }
    }
  }

  std::vector<Point2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<int> refinement_edges_;
  int level_ = 0;
  std::vector<ElementGeometry> geometry_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> triangle_edges_;
  std::vector<std::array<int, 2>> edge_triangles_;
  MeshPtr coarser_;
  std::vector<int> parents_;
};

/// n x n squares, each cut by the diagonal from lower left to upper right.
/// The diagonal is the refinement edge of both halves.
inline MeshPtr unit_square_mesh(int n) {
  if (n < 1) {
    throw MeshError("unit_square_mesh needs n >= 1");
  }
  std::vector<Point2> vertices;
  vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      vertices.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
    }
  }
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> refinement;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = j * (n + 1) + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + n + 1;
      const int v11 = v01 + 1;
      triangles.push_back({v00, v10, v11});
      refinement.push_back(1);
      triangles.push_back({v00, v11, v01});
      refinement.push_back(2);
    }
  }
  return std::make_shared<const Mesh>(std::move(vertices), std::move(triangles), std::move(refinement));
}

/// Mesh consisting of one triangle.
inline MeshPtr single_triangle_mesh(const Point2& a, const Point2& b, const Point2& c) {
  return std::make_shared<const Mesh>(std::vector<Point2>{a, b, c},
                                      std::vector<std::array<int, 3>>{{0, 1, 2}}, std::vector<int>{});
}

/// Red refinement: every triangle is split into four similar children. Each
/// child inherits the parent's local refinement edge index, which keeps the
/// edge parallel to the parent's refinement edge marked.
inline MeshPtr uniform_refine(const MeshPtr& mesh) {
  std::vector<Point2> vertices = mesh->vertices();
  const int first_midpoint = static_cast<int>(vertices.size());
  for (const auto& e : mesh->edges()) {
    vertices.push_back(0.5 * (mesh->vertices()[e[0]] + mesh->vertices()[e[1]]));
  }
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> refinement;
  std::vector<int> parents;
  triangles.reserve(4 * mesh->num_cells());
  for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
    const auto& t = mesh->triangles()[k];
    const auto& te = mesh->triangle_edges()[k];
    const int m0 = first_midpoint + te[0];
    const int m1 = first_midpoint + te[1];
    const int m2 = first_midpoint + te[2];
    const int r = mesh->refinement_edges()[k];
    for (const auto& child : {std::array<int, 3>{t[0], m2, m1}, std::array<int, 3>{m2, t[1], m0},
                              std::array<int, 3>{m1, m0, t[2]}, std::array<int, 3>{m0, m1, m2}}) {
      triangles.push_back(child);
      refinement.push_back(r);
      parents.push_back(static_cast<int>(k));
    }
  }
  Mesh fine(std::move(vertices), std::move(triangles), std::move(refinement), mesh->level() + 1);
  return std::make_shared<const Mesh>(std::move(fine).with_history(mesh, std::move(parents)));
}

/// Newest-vertex bisection of the marked triangles plus the closure needed
/// for conformity. Every marked triangle is bisected at least once; a
/// triangle is cut into at most four pieces. Returns `mesh` itself when
/// nothing is marked.
inline MeshPtr bisect(const MeshPtr& mesh, const std::vector<int>& marked) {
  if (marked.empty()) {
    return mesh;
  }
  const std::size_t n_edges = mesh->num_edges();
  const auto& tri_edges = mesh->triangle_edges();
  const auto& ref = mesh->refinement_edges();
  std::vector<char> edge_marked(n_edges, 0);
  std::deque<int> pending;

  auto mark_edge = [&](int e) {
    if (!edge_marked[e]) {
      edge_marked[e] = 1;
      for (int t : mesh->edge_triangles()[e]) {
        if (t >= 0) {
          pending.push_back(t);
        }
      }
    }
  };
  for (int t : marked) {
    if (t < 0 || static_cast<std::size_t>(t) >= mesh->num_cells()) {
      throw MeshError("marked triangle index out of range");
    }
    mark_edge(tri_edges[t][ref[t]]);
  }
  // Closure: a triangle with any marked edge must have its refinement edge marked.
  while (!pending.empty()) {
    const int t = pending.front();
    pending.pop_front();
    const int r_edge = tri_edges[t][ref[t]];
    if (!edge_marked[r_edge]) {
      mark_edge(r_edge);
    }
  }

  std::vector<Point2> vertices = mesh->vertices();
  std::unordered_map<std::uint64_t, int> midpoint;
  for (std::size_t e = 0; e < n_edges; ++e) {
    if (edge_marked[e]) {
      const auto& ev = mesh->edges()[e];
      midpoint.emplace(detail::edge_key(ev[0], ev[1]), static_cast<int>(vertices.size()));
      vertices.push_back(0.5 * (mesh->vertices()[ev[0]] + mesh->vertices()[ev[1]]));
    }
  }

  std::vector<std::array<int, 3>> triangles;
  std::vector<int> refinement;
  std::vector<int> parents;
  triangles.reserve(mesh->num_cells() + 3 * midpoint.size());

  // Recursive split; the two halves of a bisected edge are never marked, so
  // the depth is at most two.
  auto split = [&](auto&& self, const std::array<int, 3>& t, int r, int parent) -> void {
    const int c = t[r];
    const int a = t[(r + 1) % 3];
    const int b = t[(r + 2) % 3];
    const auto it = midpoint.find(detail::edge_key(a, b));
    if (it == midpoint.end()) {
      triangles.push_back(t);
      refinement.push_back(r);
      parents.push_back(parent);
      return;
    }
    const int m = it->second;
    self(self, std::array<int, 3>{c, a, m}, 2, parent);
    self(self, std::array<int, 3>{c, m, b}, 1, parent);
  };
  for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
    split(split, mesh->triangles()[k], ref[k], static_cast<int>(k));
  }
  Mesh fine(std::move(vertices), std::move(triangles), std::move(refinement), mesh->level() + 1);
  return std::make_shared<const Mesh>(std::move(fine).with_history(mesh, std::move(parents)));
}

/// For every triangle of `fine`, the triangle of `coarse` containing it.
/// `coarse` must be `fine` itself or one of its recorded ancestors.
inline std::vector<int> ancestor_map(const Mesh& fine, const Mesh& coarse) {
  std::vector<int> map(fine.num_cells());
  for (std::size_t k = 0; k < map.size(); ++k) {
    map[k] = static_cast<int>(k);
  }
  const Mesh* current = &fine;
  while (current != &coarse) {
    if (!current->coarser()) {
      throw MeshMismatch("mesh is not a refinement of the given coarse mesh");
    }
    const auto& parents = current->parents();
    for (int& m : map) {
      m = parents[m];
    }
    current = current->coarser().get();
  }
  return map;
}

/// Smallest interior angle over all triangles, in radians.
inline double min_angle(const Mesh& mesh) {
  double result = M_PI;
  for (const auto& t : mesh.triangles()) {
    for (int j = 0; j < 3; ++j) {
      const Point2 u = mesh.vertices()[t[(j + 1) % 3]] - mesh.vertices()[t[j]];
      const Point2 v = mesh.vertices()[t[(j + 2) % 3]] - mesh.vertices()[t[j]];
      const double c = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
      result = std::min(result, std::acos(c));
    }
  }
  return result;
}

/// True when no vertex lies in the interior of a boundary edge, i.e. when
/// the mesh has no hanging nodes.
inline bool has_no_hanging_nodes(const Mesh& mesh) {
  const auto& x = mesh.vertices();
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    if (!mesh.is_boundary_edge(e)) {
      continue;
    }
    const Point2& a = x[mesh.edges()[e][0]];
    const Point2& b = x[mesh.edges()[e][1]];
    const double len2 = (b - a).squaredNorm();
    for (const auto& other : mesh.edges()) {
      for (int v : other) {
        if (v == mesh.edges()[e][0] || v == mesh.edges()[e][1]) {
          continue;
        }
        const Point2 d = x[v] - a;
        const double s = d.dot(b - a) / len2;
        const double cross = (b - a).x() * d.y() - (b - a).y() * d.x();
        if (s > 1e-12 && s < 1 - 1e-12 && std::abs(cross) < 1e-12 * len2) {
          return false;
        }
      }
    }
  }
  return true;
}

/// Plain-text mesh format: `V T B`, then V lines `x y`, T lines `i j k r`,
/// B lines `i j`, 0-based indices. Coordinates use the shortest decimal
/// representation that round-trips.
inline void write_mesh(std::ostream& out, const Mesh& mesh) {
  const auto boundary = mesh.boundary_edges();
  out << mesh.num_vertices() << ' ' << mesh.num_cells() << ' ' << boundary.size() << '\n';
  for (const auto& v : mesh.vertices()) {
    out << detail::format_double(v.x()) << ' ' << detail::format_double(v.y()) << '\n';
  }
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const auto& t = mesh.triangles()[k];
    out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << mesh.refinement_edges()[k] << '\n';
  }
  for (const auto& [a, b] : boundary) {
    out << a << ' ' << b << '\n';
  }
}

inline MeshPtr read_mesh(std::istream& in) {
  std::size_t nv = 0;
  std::size_t nt = 0;
  std::size_t nb = 0;
  if (!(in >> nv >> nt >> nb)) {
    throw MeshError("mesh header `V T B` missing");
  }
  auto read_double = [&in]() {
    std::string token;
    if (!(in >> token)) {
      throw MeshError("unexpected end of mesh file");
    }
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
      throw MeshError("bad coordinate `" + token + "`");
    }
    return value;
  };
  std::vector<Point2> vertices(nv);
  for (auto& v : vertices) {
    v.x() = read_double();
    v.y() = read_double();
  }
  std::vector<std::array<int, 3>> triangles(nt);
  std::vector<int> refinement(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    if (!(in >> triangles[k][0] >> triangles[k][1] >> triangles[k][2] >> refinement[k])) {
      throw MeshError("bad triangle line " + std::to_string(k));
    }
  }
  std::set<std::pair<int, int>> listed;
  for (std::size_t e = 0; e < nb; ++e) {
    int a = 0;
    int b = 0;
    if (!(in >> a >> b)) {
      throw MeshError("bad boundary edge line " + std::to_string(e));
    }
    listed.emplace(std::min(a, b), std::max(a, b));
  }
  auto mesh = std::make_shared<const Mesh>(std::move(vertices), std::move(triangles), std::move(refinement));
  if (listed != mesh->boundary_edges()) {
    throw MeshError("listed boundary edges differ from the edges with one incident triangle");
  }
  return mesh;
}

/// Geometry of a segment [a, a + h] mapped from the reference segment [0, 1].
struct SegmentGeometry {
  double offset = 0.0;
  double length = 1.0;

  Point<1> to_physical(const Point<1>& ref) const { return Point<1>(offset + length * ref(0)); }
  Point<1> to_reference(const Point<1>& x) const { return Point<1>((x(0) - offset) / length); }
  double measure() const { return length; }
  double diameter() const { return length; }
};

/// Uniform partition of an interval into segments.
class IntervalMesh {
public:
  static constexpr int dim = 1;
  static constexpr ElementKind kind = ElementKind::segment;
  using point_type = Point<1>;
  using geometry_type = SegmentGeometry;

  IntervalMesh(double a, double b, int n) {
    if (n < 1 || !(b > a)) {
      throw MeshError("interval mesh needs a < b and n >= 1");
    }
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) {
      cells_.push_back({a + i * h, h});
    }
  }

  std::size_t num_cells() const { return cells_.size(); }
  const SegmentGeometry& geometry(std::size_t k) const { return cells_[k]; }

private:
  std::vector<SegmentGeometry> cells_;
};

}  // namespace randproj
