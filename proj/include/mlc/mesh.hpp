#pragma once
/**
 * @file mesh.hpp
 * @brief Structured triangulations of the unit square, regular refinement and
 *        nested mesh hierarchies with their P1 prolongation operators.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlc/sparse.hpp"

namespace mlc {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Triangle = std::array<int, 3>;

enum class DiagonalPattern { right_diagonal, criss_cross };

/// Conforming triangulation of a polygonal domain. Vertices of every
/// triangle are stored counterclockwise.
struct Mesh {
  std::vector<Point> nodes;
  std::vector<Triangle> triangles;
  std::vector<bool> boundary_mask;
  double mesh_size_h = 0.0;

  [[nodiscard]] std::size_t num_nodes() const { return nodes.size(); }
  [[nodiscard]] std::size_t num_triangles() const { return triangles.size(); }

  [[nodiscard]] std::size_t num_interior() const {
    return static_cast<std::size_t>(std::count(boundary_mask.begin(), boundary_mask.end(), false));
  }

  /// Twice the signed area of triangle @p t.
  [[nodiscard]] double twice_signed_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Point& a = nodes[tri[0]];
    const Point& b = nodes[tri[1]];
    const Point& c = nodes[tri[2]];
    return (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  }

  [[nodiscard]] double area(std::size_t t) const { return 0.5 * twice_signed_area(t); }
};

/// Coarse-to-fine nodal interpolation between two nested meshes.
struct Prolongation {
  SparseMatrix matrix;          // N_fine x N_coarse
  std::vector<int> injection;   // coarse node -> fine node at the same position
  int coarse_level = 0;
  int fine_level = 1;
};

struct MeshHierarchy {
  std::vector<Mesh> levels;
  std::vector<Prolongation> prolongations;  // prolongations[k] maps level k -> k+1
  int beta = 2;

  [[nodiscard]] int num_levels() const { return static_cast<int>(levels.size()); }
  [[nodiscard]] const Mesh& finest() const { return levels.back(); }
};

namespace detail {

inline bool on_unit_square_boundary(const Point& p) {
  constexpr double eps = 1e-12;
  return std::abs(p.x) <= eps || std::abs(p.x - 1.0) <= eps || std::abs(p.y) <= eps ||
         std::abs(p.y - 1.0) <= eps;
}

inline double max_element_diameter(const Mesh& mesh) {
  double h = 0.0;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const Point& a = mesh.nodes[tri[e]];
      const Point& b = mesh.nodes[tri[(e + 1) % 3]];
      h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
    }
  }
  return h;
}

/// Sort key placing nodes in lexicographic (y, x) order. Coordinates are
/// snapped to a 1e-10 grid first so that rounding noise from refinement does
/// not perturb the row ordering.
inline std::pair<std::int64_t, std::int64_t> lexicographic_key(const Point& p) {
  return {std::llround(p.y * 1e10), std::llround(p.x * 1e10)};
}

/// Renumbers nodes lexicographically by (y, x). Returns old -> new map.
inline std::vector<int> renumber_lexicographic(Mesh& mesh) {
  const std::size_t n = mesh.nodes.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return lexicographic_key(mesh.nodes[a]) < lexicographic_key(mesh.nodes[b]);
  });
  std::vector<int> old_to_new(n);
  std::vector<Point> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    old_to_new[order[i]] = static_cast<int>(i);
    nodes[i] = mesh.nodes[order[i]];
  }
  mesh.nodes = std::move(nodes);
  for (auto& tri : mesh.triangles) {
    for (auto& v : tri) v = old_to_new[v];
  }
  return old_to_new;
}

inline void finalize(Mesh& mesh) {
  mesh.boundary_mask.resize(mesh.nodes.size());
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    mesh.boundary_mask[i] = on_unit_square_boundary(mesh.nodes[i]);
  }
  mesh.mesh_size_h = max_element_diameter(mesh);
}

}  // namespace detail

/// Checks the structural invariants: positive orientation, conformity and
/// area partition of the unit square. Throws std::runtime_error naming the
/// first violation.
inline void validate_mesh(const Mesh& mesh) {
  double total = 0.0;
  std::map<std::pair<int, int>, int> edge_count;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double a = mesh.area(t);
    if (!(a > 0.0)) {
      throw std::runtime_error("mesh: triangle " + std::to_string(t) + " has nonpositive area");
    }
    total += a;
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      int i = tri[e];
      int j = tri[(e + 1) % 3];
      if (i > j) std::swap(i, j);
      ++edge_count[{i, j}];
    }
  }
  for (const auto& [edge, count] : edge_count) {
    const bool boundary_edge =
        mesh.boundary_mask[edge.first] && mesh.boundary_mask[edge.second] && count == 1;
    if (count > 2 || (count == 1 && !boundary_edge)) {
      throw std::runtime_error("mesh: nonconforming edge (" + std::to_string(edge.first) + "," +
                               std::to_string(edge.second) + ")");
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::runtime_error("mesh: triangle areas do not sum to 1");
  }
}

/// Uniform triangulation of [0,1]^2 with @p m subdivisions per side.
///
/// right_diagonal splits every cell along the (0,0)-(1,1) diagonal, giving
/// (m+1)^2 nodes and 2m^2 triangles. criss_cross alternates the diagonal
/// direction in a checkerboard fashion (same node and triangle counts).
inline Mesh generate_unit_square(int m, DiagonalPattern pattern = DiagonalPattern::right_diagonal) {
  if (m < 1) throw std::invalid_argument("generate_unit_square: m must be >= 1");
  Mesh mesh;
  const int np = m + 1;
  mesh.nodes.reserve(static_cast<std::size_t>(np) * np);
  for (int j = 0; j < np; ++j) {
    for (int i = 0; i < np; ++i) {
      mesh.nodes.push_back({static_cast<double>(i) / m, static_cast<double>(j) / m});
    }
  }
  auto vid = [np](int i, int j) { return j * np + i; };
  mesh.triangles.reserve(2 * static_cast<std::size_t>(m) * m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const int v00 = vid(i, j);
      const int v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1);
      const int v11 = vid(i + 1, j + 1);
      const bool flip = pattern == DiagonalPattern::criss_cross && ((i + j) % 2 == 1);
      if (!flip) {
        mesh.triangles.push_back({v00, v10, v11});
        mesh.triangles.push_back({v00, v11, v01});
      } else {
        mesh.triangles.push_back({v00, v10, v01});
        mesh.triangles.push_back({v10, v11, v01});
      }
    }
  }
  detail::finalize(mesh);
  return mesh;
}

/// Regular refinement: every triangle is split into beta^2 similar children.
/// Parent nodes keep their coordinates; the returned prolongation is the P1
/// nodal interpolation from @p mesh onto the refined mesh.
inline std::pair<Mesh, Prolongation> refine_regular(const Mesh& mesh, int beta) {
  if (beta < 2) throw std::invalid_argument("refine_regular: beta must be >= 2");

  Mesh fine;
  // Interpolation weights of each new node with respect to coarse nodes.
  std::vector<std::vector<std::pair<int, double>>> weights;
  auto add_node = [&](Point p, std::vector<std::pair<int, double>> w) {
    fine.nodes.push_back(p);
    weights.push_back(std::move(w));
    return static_cast<int>(fine.nodes.size()) - 1;
  };

  std::vector<int> injection(mesh.num_nodes());
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    injection[i] = add_node(mesh.nodes[i], {{static_cast<int>(i), 1.0}});
  }

  // Interior points of each coarse edge, ordered from the lower to the higher
  // vertex index, so neighbouring triangles see identical nodes.
  std::map<std::pair<int, int>, std::vector<int>> edge_nodes;
  auto edge_points = [&](int a, int b) -> const std::vector<int>& {
    const int lo = std::min(a, b);
    const int hi = std::max(a, b);
    auto it = edge_nodes.find({lo, hi});
    if (it != edge_nodes.end()) return it->second;
    std::vector<int> ids;
    ids.reserve(beta - 1);
    const Point& pa = mesh.nodes[lo];
    const Point& pb = mesh.nodes[hi];
    for (int t = 1; t < beta; ++t) {
      const double s = static_cast<double>(t) / beta;
      ids.push_back(add_node({pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y)},
                             {{lo, 1.0 - s}, {hi, s}}));
    }
    return edge_nodes.emplace(std::make_pair(lo, hi), std::move(ids)).first->second;
  };

  for (const auto& tri : mesh.triangles) {
    // Local lattice: node(i, j) sits at barycentric (1 - (i+j)/beta, i/beta, j/beta).
    std::vector<int> lattice(static_cast<std::size_t>(beta + 1) * (beta + 1), -1);
    auto at = [&](int i, int j) -> int& { return lattice[i * (beta + 1) + j]; };
    at(0, 0) = injection[tri[0]];
    at(beta, 0) = injection[tri[1]];
    at(0, beta) = injection[tri[2]];

    auto fill_edge = [&](int from, int to, auto&& place) {
      const auto& ids = edge_points(tri[from], tri[to]);
      const bool forward = tri[from] < tri[to];
      for (int t = 1; t < beta; ++t) place(t, ids[forward ? t - 1 : beta - 1 - t]);
    };
    fill_edge(0, 1, [&](int t, int id) { at(t, 0) = id; });
    fill_edge(0, 2, [&](int t, int id) { at(0, t) = id; });
    fill_edge(1, 2, [&](int t, int id) { at(beta - t, t) = id; });

    const Point& p0 = mesh.nodes[tri[0]];
    const Point& p1 = mesh.nodes[tri[1]];
    const Point& p2 = mesh.nodes[tri[2]];
    for (int i = 1; i < beta; ++i) {
      for (int j = 1; i + j < beta; ++j) {
        const double l1 = static_cast<double>(i) / beta;
        const double l2 = static_cast<double>(j) / beta;
        const double l0 = 1.0 - l1 - l2;
        at(i, j) = add_node({l0 * p0.x + l1 * p1.x + l2 * p2.x, l0 * p0.y + l1 * p1.y + l2 * p2.y},
                            {{tri[0], l0}, {tri[1], l1}, {tri[2], l2}});
      }
    }

    for (int i = 0; i < beta; ++i) {
      for (int j = 0; i + j < beta; ++j) {
        fine.triangles.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
        if (i + j + 1 < beta) {
          fine.triangles.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
        }
      }
    }
  }

  const auto old_to_new = detail::renumber_lexicographic(fine);
  detail::finalize(fine);

  TripletList triplets;
  for (std::size_t old = 0; old < weights.size(); ++old) {
    for (const auto& [coarse, w] : weights[old]) {
      if (w != 0.0) triplets.push_back({old_to_new[old], coarse, w});
    }
  }
  Prolongation prolongation;
  prolongation.matrix =
      SparseMatrix::from_triplets(fine.num_nodes(), mesh.num_nodes(), std::move(triplets));
  prolongation.injection.resize(injection.size());
  for (std::size_t i = 0; i < injection.size(); ++i) {
    prolongation.injection[i] = old_to_new[injection[i]];
  }
  return {std::move(fine), std::move(prolongation)};
}

/// levels[0] = initial, levels[k] = refine_regular(levels[k-1], beta).
inline MeshHierarchy build_hierarchy(Mesh initial, int beta, int n_levels) {
  if (n_levels < 1) throw std::invalid_argument("build_hierarchy: n_levels must be >= 1");
  if (beta < 2) throw std::invalid_argument("build_hierarchy: beta must be >= 2");
  MeshHierarchy hierarchy;
  hierarchy.beta = beta;
  hierarchy.levels.push_back(std::move(initial));
  for (int k = 1; k < n_levels; ++k) {
    auto [fine, prolongation] = refine_regular(hierarchy.levels.back(), beta);
    prolongation.coarse_level = k - 1;
    prolongation.fine_level = k;
    hierarchy.levels.push_back(std::move(fine));
    hierarchy.prolongations.push_back(std::move(prolongation));
  }
  return hierarchy;
}

/// Text dump: "nodes <N> triangles <T>", N lines "x y b", T lines "i j k".
inline void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "nodes " << mesh.num_nodes() << " triangles " << mesh.num_triangles() << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    out << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' ' << (mesh.boundary_mask[i] ? 1 : 0)
        << '\n';
  }
  for (const auto& tri : mesh.triangles) {
    out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  }
}

inline void write_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open mesh file for writing: " + path);
  write_mesh(out, mesh);
}

}  // namespace mlc
