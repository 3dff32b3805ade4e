#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "mlc/dense.hpp"
#include "mlc/fem.hpp"
#include "mlc/mesh.hpp"

using namespace mlc;
using std::numbers::pi;

namespace {

Mesh reference_triangle() {
  Mesh mesh;
  mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  mesh.triangles = {{0, 1, 2}};
  mesh.boundary_mask = {true, true, true};
  return mesh;
}

double sin_sin(double x, double y) { return std::sin(pi * x) * std::sin(pi * y); }

Eigen::MatrixXd to_eigen(const SparseMatrix& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) d(i, j) = a.coeff(i, j);
  }
  return d;
}

}  // namespace

TEST(Quadrature, SevenPointRuleIsDegreeFive) {
  const auto& rule = default_rule();
  ASSERT_EQ(rule.size(), 7u);
  // int_T x^i y^j over the reference triangle is i! j! / (i + j + 2)!.
  auto factorial = [](int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  };
  for (int i = 0; i <= 5; ++i) {
    for (int j = 0; i + j <= 5; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = rule.points[q][1];
        const double y = rule.points[q][2];
        s += rule.weights[q] * std::pow(x, i) * std::pow(y, j);
      }
      EXPECT_NEAR(s, factorial(i) * factorial(j) / factorial(i + j + 2), 1e-15) << i << "," << j;
    }
  }
}

TEST(AssembleStiffness, ReferenceTriangle) {
  const SparseMatrix k = assemble_stiffness(reference_triangle());
  const double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(k.coeff(i, j), expected[i][j], 1e-15);
  }
}

TEST(AssembleStiffness, RowSumsVanish) {
  for (auto pattern : {DiagonalPattern::right_diagonal, DiagonalPattern::criss_cross}) {
    const SparseMatrix k = assemble_stiffness(generate_unit_square(7, pattern));
    const Vector ones(k.rows(), 1.0);
    for (double r : k * ones) EXPECT_NEAR(r, 0.0, 1e-12);
  }
}

TEST(AssembleStiffness, ExactlySymmetric) {
  const SparseMatrix k = assemble_stiffness(generate_unit_square(2));
  EXPECT_EQ(k.asymmetry(), 0.0);
  const SparseMatrix k8 = assemble_stiffness(generate_unit_square(8, DiagonalPattern::criss_cross));
  EXPECT_EQ(k8.asymmetry(), 0.0);
}

TEST(AssembleStiffness, DegenerateTriangleReported) {
  Mesh mesh;
  mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  mesh.triangles = {{0, 1, 2}};
  mesh.boundary_mask = {true, true, true};
  try {
    (void)assemble_stiffness(mesh);
    FAIL() << "expected an exception";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
}

TEST(AssembleStiffness, PositiveDefiniteAfterElimination) {
  const Mesh mesh = generate_unit_square(5);
  const Eigen::MatrixXd k = to_eigen(eliminate_dirichlet(assemble_stiffness(mesh), mesh.boundary_mask));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(AssembleStiffness, MatchesDirichletIntegral) {
  const Mesh mesh = generate_unit_square(6, DiagonalPattern::criss_cross);
  const SparseMatrix k = assemble_stiffness(mesh);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(mesh.num_nodes());
  Vector w(mesh.num_nodes());
  for (auto& x : v) x = dist(rng);
  for (auto& x : w) x = dist(rng);
  double integral = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    Eigen::Matrix3d a;
    for (int i = 0; i < 3; ++i) a.row(i) << mesh.nodes[tri[i]].x, mesh.nodes[tri[i]].y, 1.0;
    const Eigen::Vector3d cv = a.lu().solve(Eigen::Vector3d(v[tri[0]], v[tri[1]], v[tri[2]]));
    const Eigen::Vector3d cw = a.lu().solve(Eigen::Vector3d(w[tri[0]], w[tri[1]], w[tri[2]]));
    integral += mesh.area(t) * (cv[0] * cw[0] + cv[1] * cw[1]);
  }
  EXPECT_NEAR(dot(v, k * w), integral, 1e-12);
}

TEST(AssembleMass, ReferenceTriangle) {
  const SparseMatrix m = assemble_mass(reference_triangle());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(m.coeff(i, j), (i == j ? 2.0 : 1.0) / 24.0, 1e-16);
  }
  const SparseMatrix mw = assemble_mass(reference_triangle(), [](double, double) { return 1.0; });
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(mw.coeff(i, j), (i == j ? 2.0 : 1.0) / 24.0, 1e-16);
  }
}

TEST(AssembleMass, ZeroWeightGivesZero) {
  const SparseMatrix m = assemble_mass(generate_unit_square(3), [](double, double) { return 0.0; });
  for (double v : m.values()) EXPECT_EQ(v, 0.0);
}

TEST(AssembleMass, NegativeWeightRejected) {
  EXPECT_THROW(assemble_mass(generate_unit_square(3), [](double x, double) { return x - 0.5; }),
               std::domain_error);
}

TEST(AssembleMass, TotalMeasure) {
  for (int m : {1, 3, 8}) {
    const SparseMatrix mass = assemble_mass(generate_unit_square(m));
    const Vector ones(mass.rows(), 1.0);
    EXPECT_NEAR(dot(ones, mass * ones), 1.0, 1e-10);
    EXPECT_EQ(mass.asymmetry(), 0.0);
  }
}

TEST(AssembleMass, CubicReactionWeightIsPsd) {
  const Mesh mesh = generate_unit_square(5);
  const Vector y = interpolate(mesh, sin_sin);
  Vector w = evaluate_at_quadrature(mesh, y);
  for (double& v : w) v = 3.0 * v * v;
  const Eigen::MatrixXd m = to_eigen(assemble_mass(mesh, w));
  EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-14);
}

TEST(AssembleLoad, ConstantSumsToArea) {
  const Vector b = assemble_load(generate_unit_square(6), [](double, double) { return 1.0; });
  double s = 0.0;
  for (double v : b) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(AssembleLoad, P1FunctionMatchesMass) {
  const Mesh mesh = generate_unit_square(5, DiagonalPattern::criss_cross);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector w(mesh.num_nodes());
  for (auto& x : w) x = dist(rng);
  const Vector b = assemble_load(mesh, evaluate_at_quadrature(mesh, w));
  const Vector mw = assemble_mass(mesh) * w;
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i], mw[i], 1e-12);
}

TEST(AssembleLoad, SinSinIntegral) {
  const Vector b = assemble_load(generate_unit_square(32), sin_sin);
  double s = 0.0;
  for (double v : b) s += v;
  EXPECT_NEAR(s, 4.0 / (pi * pi), 1e-4);
}

TEST(ApplyDirichlet, AllBoundaryMeshForcesZero) {
  const Mesh mesh = generate_unit_square(1);
  const auto [a, b] = apply_dirichlet(assemble_stiffness(mesh), Vector(4, 1.0), mesh);
  const Vector x = dense_solve(DenseMatrix::from_sparse(a), b);
  for (double v : x) EXPECT_EQ(v, 0.0);
}

TEST(ApplyDirichlet, PreservesSymmetry) {
  const Mesh mesh = generate_unit_square(6);
  const auto [a, b] = apply_dirichlet(assemble_stiffness(mesh), Vector(mesh.num_nodes(), 1.0), mesh);
  EXPECT_EQ(a.asymmetry(), 0.0);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    if (mesh.boundary_mask[i]) EXPECT_EQ(b[i], 0.0);
  }
}

TEST(ApplyDirichlet, SingleInteriorNode) {
  const Mesh mesh = generate_unit_square(2);
  const Vector load = assemble_load(mesh, [](double, double) { return 1.0; });
  const auto [a, b] = apply_dirichlet(assemble_stiffness(mesh), load, mesh);
  const Vector x = dense_solve(DenseMatrix::from_sparse(a), b);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    if (mesh.boundary_mask[i]) {
      EXPECT_EQ(x[i], 0.0);
    } else {
      EXPECT_NEAR(a.coeff(i, i), 4.0, 1e-14);
      EXPECT_NEAR(b[i], 0.25, 1e-14);
      EXPECT_NEAR(x[i], 0.0625, 1e-12);
    }
  }
}

TEST(L2Error, ExactFieldGivesZero) {
  const Mesh mesh = generate_unit_square(4);
  const ElementQuadrature quad(mesh, default_rule());
  EXPECT_EQ(l2_error(mesh, quad.evaluate(sin_sin), sin_sin), 0.0);
}

TEST(L2Error, NormOfSinSin) {
  const Mesh mesh = generate_unit_square(16);
  const FeFunction zero{0, Vector(mesh.num_nodes(), 0.0)};
  EXPECT_NEAR(l2_error(mesh, zero, sin_sin), 0.5, 1e-6);
}

TEST(L2Error, InterpolationConvergesAtOrderTwo) {
  std::vector<double> errors;
  for (int m : {8, 16, 32, 64}) {
    const Mesh mesh = generate_unit_square(m);
    const FeFunction fh{0, interpolate(mesh, sin_sin)};
    const double e = l2_error(mesh, fh, sin_sin);
    EXPECT_GT(e, 0.0);
    errors.push_back(e);
  }
  for (std::size_t i = 1; i < errors.size(); ++i) {
    EXPECT_NEAR(std::log2(errors[i - 1] / errors[i]), 2.0, 0.1);
  }
}

TEST(Assembly, ThreadedAssemblyIsBitIdentical) {
  const Mesh mesh = generate_unit_square(64);
  set_assembly_threads(1);
  const SparseMatrix k1 = assemble_stiffness(mesh);
  const SparseMatrix m1 = assemble_mass(mesh, [](double x, double y) { return 1.0 + x * y; });
  set_assembly_threads(4);
  const SparseMatrix k4 = assemble_stiffness(mesh);
  const SparseMatrix m4 = assemble_mass(mesh, [](double x, double y) { return 1.0 + x * y; });
  set_assembly_threads(1);
  ASSERT_EQ(k1.nonzeros(), k4.nonzeros());
  for (std::size_t i = 0; i < k1.nonzeros(); ++i) {
    EXPECT_EQ(k1.values()[i], k4.values()[i]);
    EXPECT_EQ(m1.values()[i], m4.values()[i]);
  }
}
