#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mlc/fem.hpp"
#include "mlc/mesh.hpp"

using namespace mlc;

namespace {

double total_area(const Mesh& mesh) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) s += mesh.area(t);
  return s;
}

}  // namespace

TEST(GenerateUnitSquare, SmallestMesh) {
  const Mesh mesh = generate_unit_square(1);
  EXPECT_EQ(mesh.num_nodes(), 4u);
  EXPECT_EQ(mesh.num_triangles(), 2u);
  EXPECT_EQ(mesh.num_interior(), 0u);
}

TEST(GenerateUnitSquare, TwoByTwo) {
  const Mesh mesh = generate_unit_square(2);
  EXPECT_EQ(mesh.num_nodes(), 9u);
  EXPECT_EQ(mesh.num_triangles(), 8u);
  ASSERT_EQ(mesh.num_interior(), 1u);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    if (!mesh.boundary_mask[i]) {
      EXPECT_DOUBLE_EQ(mesh.nodes[i].x, 0.5);
      EXPECT_DOUBLE_EQ(mesh.nodes[i].y, 0.5);
    }
  }
}

TEST(GenerateUnitSquare, AreasSumToOne) {
  for (auto pattern : {DiagonalPattern::right_diagonal, DiagonalPattern::criss_cross}) {
    const Mesh mesh = generate_unit_square(4, pattern);
    EXPECT_NEAR(total_area(mesh), 1.0, 1e-12);
    EXPECT_NO_THROW(validate_mesh(mesh));
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) EXPECT_GT(mesh.area(t), 0.0);
  }
}

TEST(GenerateUnitSquare, RejectsZero) {
  EXPECT_THROW(generate_unit_square(0), std::invalid_argument);
}

TEST(GenerateUnitSquare, LexicographicOrder) {
  const Mesh mesh = generate_unit_square(3);
  for (std::size_t i = 1; i < mesh.num_nodes(); ++i) {
    const auto& a = mesh.nodes[i - 1];
    const auto& b = mesh.nodes[i];
    EXPECT_TRUE(a.y < b.y || (a.y == b.y && a.x < b.x));
  }
}

TEST(GenerateUnitSquare, MeshSizeIsDiagonal) {
  const Mesh mesh = generate_unit_square(4);
  EXPECT_NEAR(mesh.mesh_size_h, std::sqrt(2.0) / 4.0, 1e-15);
}

TEST(RefineRegular, BetaTwoFromOneCell) {
  const auto [fine, p] = refine_regular(generate_unit_square(1), 2);
  EXPECT_EQ(fine.num_nodes(), 9u);
  EXPECT_EQ(fine.num_triangles(), 8u);
  EXPECT_EQ(p.matrix.rows(), 9u);
  EXPECT_EQ(p.matrix.cols(), 4u);
}

TEST(RefineRegular, BetaFourFromOneCell) {
  const auto [fine, p] = refine_regular(generate_unit_square(1), 4);
  EXPECT_EQ(fine.num_nodes(), 25u);
  EXPECT_EQ(fine.num_triangles(), 32u);
  EXPECT_NO_THROW(validate_mesh(fine));
}

TEST(RefineRegular, RejectsBetaBelowTwo) {
  EXPECT_THROW(refine_regular(generate_unit_square(1), 1), std::invalid_argument);
}

TEST(RefineRegular, ReproducesLinearFunction) {
  const Mesh coarse = generate_unit_square(2);
  const auto [fine, p] = refine_regular(coarse, 2);
  const Vector c = interpolate(coarse, [](double x, double y) { return x + y; });
  const Vector f = p.matrix * c;
  for (std::size_t i = 0; i < fine.num_nodes(); ++i) {
    EXPECT_NEAR(f[i], fine.nodes[i].x + fine.nodes[i].y, 1e-15);
  }
}

TEST(RefineRegular, ParentNodesPreserved) {
  const Mesh coarse = generate_unit_square(3);
  for (int beta : {2, 3, 4}) {
    const auto [fine, p] = refine_regular(coarse, beta);
    ASSERT_EQ(p.injection.size(), coarse.num_nodes());
    for (std::size_t i = 0; i < coarse.num_nodes(); ++i) {
      const auto& a = coarse.nodes[i];
      const auto& b = fine.nodes[p.injection[i]];
      EXPECT_EQ(a.x, b.x);
      EXPECT_EQ(a.y, b.y);
      EXPECT_EQ(coarse.boundary_mask[i], fine.boundary_mask[p.injection[i]]);
    }
    EXPECT_NEAR(total_area(fine), 1.0, 1e-12);
    EXPECT_EQ(fine.num_triangles(), coarse.num_triangles() * beta * beta);
  }
}

TEST(RefineRegular, CrissCrossChildrenAreSimilar) {
  const Mesh coarse = generate_unit_square(2, DiagonalPattern::criss_cross);
  const auto [fine, p] = refine_regular(coarse, 3);
  EXPECT_NO_THROW(validate_mesh(fine));
  // Every child has area (parent area) / 9, so all areas take two values at most.
  for (std::size_t t = 0; t < fine.num_triangles(); ++t) {
    EXPECT_NEAR(fine.area(t), coarse.area(0) / 9.0, 1e-15);
  }
}

TEST(BuildHierarchy, NodeCounts) {
  const auto h = build_hierarchy(generate_unit_square(2), 2, 3);
  ASSERT_EQ(h.num_levels(), 3);
  EXPECT_EQ(h.levels[0].num_nodes(), 9u);
  EXPECT_EQ(h.levels[1].num_nodes(), 25u);
  EXPECT_EQ(h.levels[2].num_nodes(), 81u);
  EXPECT_EQ(h.prolongations.size(), 2u);
}

TEST(BuildHierarchy, SingleLevel) {
  const auto h = build_hierarchy(generate_unit_square(2), 2, 1);
  EXPECT_EQ(h.num_levels(), 1);
  EXPECT_TRUE(h.prolongations.empty());
}

TEST(BuildHierarchy, SixRefinementsOfFourByFour) {
  // Six refinements of the m=4 mesh give 66049 nodes on the seventh level.
  const auto h = build_hierarchy(generate_unit_square(4), 2, 7);
  EXPECT_EQ(h.finest().num_nodes(), 66049u);
  const double ratio = static_cast<double>(h.levels[6].num_nodes()) / h.levels[5].num_nodes();
  EXPECT_NEAR(ratio, 4.0, 0.05);
}

TEST(BuildHierarchy, MeshSizeDecaysByBeta) {
  for (int beta : {2, 4}) {
    const int m = 3;
    const auto h = build_hierarchy(generate_unit_square(m), beta, 3);
    for (int k = 0; k < h.num_levels(); ++k) {
      EXPECT_NEAR(h.levels[k].mesh_size_h, std::sqrt(2.0) / (std::pow(beta, k) * m), 1e-14);
      if (k > 0) {
        const double r = h.levels[k].mesh_size_h / h.levels[k - 1].mesh_size_h;
        EXPECT_GE(r, 0.9 / beta);
        EXPECT_LE(r, 1.1 / beta);
      }
    }
  }
}

TEST(BuildHierarchy, ComposedProlongationIsPointwiseEvaluation) {
  const auto h = build_hierarchy(generate_unit_square(2), 2, 4);
  // A P1 function on level 0; its value at any point is the barycentric
  // interpolation inside the containing coarse triangle.
  const Mesh& coarse = h.levels[0];
  Vector c(coarse.num_nodes());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::sin(3.0 * i) + 0.1 * i;
  Vector v = c;
  for (const auto& p : h.prolongations) v = p.matrix * v;
  const Mesh& fine = h.finest();
  for (std::size_t i = 0; i < fine.num_nodes(); ++i) {
    const Point& x = fine.nodes[i];
    bool found = false;
    for (std::size_t t = 0; t < coarse.num_triangles() && !found; ++t) {
      const auto& tri = coarse.triangles[t];
      const Point& a = coarse.nodes[tri[0]];
      const Point& b = coarse.nodes[tri[1]];
      const Point& d = coarse.nodes[tri[2]];
      const double det = (b.x - a.x) * (d.y - a.y) - (d.x - a.x) * (b.y - a.y);
      const double l1 = ((x.x - a.x) * (d.y - a.y) - (d.x - a.x) * (x.y - a.y)) / det;
      const double l2 = ((b.x - a.x) * (x.y - a.y) - (x.x - a.x) * (b.y - a.y)) / det;
      const double l0 = 1.0 - l1 - l2;
      if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
      found = true;
      EXPECT_NEAR(v[i], l0 * c[tri[0]] + l1 * c[tri[1]] + l2 * c[tri[2]], 1e-13);
    }
    EXPECT_TRUE(found);
  }
}

TEST(WriteMesh, Format) {
  std::ostringstream out;
  write_mesh(out, generate_unit_square(1));
  std::istringstream in(out.str());
  std::string word;
  std::size_t n = 0;
  std::size_t t = 0;
  in >> word >> n;
  EXPECT_EQ(word, "nodes");
  in >> word >> t;
  EXPECT_EQ(word, "triangles");
  EXPECT_EQ(n, 4u);
  EXPECT_EQ(t, 2u);
  double x = 0;
  double y = 0;
  int b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    in >> x >> y >> b;
    EXPECT_EQ(b, 1);
  }
  int i0 = 0;
  int i1 = 0;
  int i2 = 0;
  for (std::size_t i = 0; i < t; ++i) {
    ASSERT_TRUE(in >> i0 >> i1 >> i2);
    EXPECT_GE(std::min({i0, i1, i2}), 0);
    EXPECT_LT(std::max({i0, i1, i2}), 4);
  }
}
