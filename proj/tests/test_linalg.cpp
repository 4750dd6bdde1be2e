#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "scenarios.hpp"
#include "vasotrans/eigensolver.hpp"
#include "vasotrans/fem.hpp"
#include "vasotrans/mesh.hpp"
#include "vasotrans/solvers.hpp"

using namespace vasotrans;
using scenario::dense;

namespace {

// Nonsymmetric 2D convection-diffusion stencil on an n x n grid.
SparseMatrix convection_diffusion(int n, double peclet) {
  TripletList t;
  auto id = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      t.add(id(i, j), id(i, j), 4.0);
      if (i > 0) t.add(id(i, j), id(i - 1, j), -1.0 - peclet);
      if (i + 1 < n) t.add(id(i, j), id(i + 1, j), -1.0 + peclet);
      if (j > 0) t.add(id(i, j), id(i, j - 1), -1.0);
      if (j + 1 < n) t.add(id(i, j), id(i, j + 1), -1.0);
    }
  }
  return SparseMatrix::from_triplets(n * n, n * n, t);
}

Vector random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(Sparse, TripletsSumDuplicatesAndDropZeros) {
  TripletList t;
  t.add(0, 1, 2.0);
  t.add(0, 1, 3.0);
  t.add(1, 0, 1.0);
  t.add(1, 0, -1.0);
  t.add(2, 2, 7.0);
  const auto A = SparseMatrix::from_triplets(3, 3, t);
  EXPECT_EQ(A.nnz(), 2u);
  EXPECT_EQ(A.at(0, 1), 5.0);
  EXPECT_EQ(A.at(1, 0), 0.0);
  EXPECT_EQ(A.trace(), 7.0);
}

TEST(Sparse, ProductsMatchDense) {
  const auto A = convection_diffusion(5, 0.3);
  const auto B = add(A.transpose(), SparseMatrix::identity(25), 2.0, -1.0);
  const Eigen::MatrixXd Ad = dense(A), Bd = dense(B);
  EXPECT_LT((dense(multiply(A, B)) - Ad * Bd).norm(), 1e-12);
  EXPECT_LT((Bd - (2.0 * Ad.transpose() - Eigen::MatrixXd::Identity(25, 25))).norm(), 1e-14);
  const Vector x = random_vector(25, 3);
  const Vector y = A * x;
  const Vector yt = A.multiply_transpose(x);
  const Eigen::Map<const Eigen::VectorXd> xe(x.data(), 25);
  EXPECT_LT((Eigen::Map<const Eigen::VectorXd>(y.data(), 25) - Ad * xe).norm(), 1e-13);
  EXPECT_LT((Eigen::Map<const Eigen::VectorXd>(yt.data(), 25) - Ad.transpose() * xe).norm(), 1e-13);
  EXPECT_FALSE(A.is_symmetric(1e-12));
  EXPECT_TRUE(convection_diffusion(4, 0.0).is_symmetric(0.0));
}

TEST(Sparse, SerialAndParallelSpmvAgree) {
  const auto A = convection_diffusion(30, 0.2);
  const Vector x = random_vector(A.cols(), 11);
  Vector ys(A.rows()), yp(A.rows());
  A.multiply(x, ys, Execution::Serial);
  A.multiply(x, yp, Execution::Parallel);
  EXPECT_EQ(ys, yp);
}

TEST(Parallel, ChunksCoverRange) {
  const auto c = chunk_ranges(103, 4);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c.front().first, 0u);
  EXPECT_EQ(c.back().second, 103u);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_EQ(c[i].first, c[i - 1].second);
}

TEST(Solvers, LuMatchesDenseOnNonsymmetric) {
  const auto A = convection_diffusion(12, 0.4);
  const Vector b = random_vector(A.rows(), 5);
  LuSolver lu(A);
  const Vector x = lu.solve(b);
  const Eigen::VectorXd ref = dense(A).partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
  EXPECT_LT((Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()) - ref).norm() / ref.norm(), 1e-12);
  EXPECT_TRUE(residual_contract_holds(A, x, b));
  const Vector y = lu.solve_transpose(b);
  const Eigen::VectorXd reft =
      dense(A).transpose().partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
  EXPECT_LT((Eigen::Map<const Eigen::VectorXd>(y.data(), y.size()) - reft).norm() / reft.norm(), 1e-12);
}

TEST(Solvers, SymmetricPathAndSingularMatrix) {
  const auto A = convection_diffusion(10, 0.0);
  const Vector b = random_vector(A.rows(), 9);
  const Vector x = solve_direct(A, b);
  EXPECT_TRUE(residual_contract_holds(A, x, b));
  TripletList t;
  t.add(0, 0, 1.0);
  t.add(1, 0, 1.0);
  EXPECT_THROW(LuSolver(SparseMatrix::from_triplets(2, 2, t)), LinalgError);
}

TEST(Solvers, BicgstabIlu0Converges) {
  const auto A = convection_diffusion(25, 0.5);
  const Vector b = random_vector(A.rows(), 21);
  const auto r = solve_iterative(A, b);
  EXPECT_LE(r.relative_residual, 1e-10);
  const Vector x = solve_direct(A, b);
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - r.x[i]));
  EXPECT_LT(d, 1e-8);
  IterativeOptions few;
  few.max_iter = 1;
  few.preconditioner = Preconditioner::None;
  EXPECT_THROW(solve_iterative(A, b, few), SolverError);
}

TEST(Solvers, Ilu0IsExactOnTridiagonal) {
  TripletList t;
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    t.add(i, i, 3.0 + 0.1 * i);
    if (i > 0) t.add(i, i - 1, -1.0);
    if (i + 1 < n) t.add(i, i + 1, -1.3);
  }
  const auto A = SparseMatrix::from_triplets(n, n, t);
  const Vector b = random_vector(n, 1);
  Vector z(n);
  Ilu0(A).apply(b, z);
  const Vector x = solve_direct(A, b);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(z[i], x[i], 1e-13);
}

TEST(BlockSystem, DirichletIsIdempotentAndSymmetric) {
  BlockSystem s({{"a", 3}, {"b", 2}});
  TripletList t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t.add(i, j, i == j ? 4.0 : 1.0);
  }
  s.add_block(0, 0, SparseMatrix::from_triplets(3, 3, t));
  s.add_block(1, 1, SparseMatrix::identity(2), 2.0);
  TripletList c;
  c.add(0, 0, 1.0);
  c.add(1, 2, 1.0);
  const auto C = SparseMatrix::from_triplets(2, 3, c);
  s.add_block(1, 0, C);
  s.add_block(0, 1, C.transpose());
  s.rhs(0) = {1.0, 2.0, 3.0};
  s.rhs(1) = {4.0, 5.0};
  const std::vector<int> dofs{2};
  s.apply_dirichlet(0, dofs, 0.5);
  const auto M1 = s.monolithic();
  const auto b1 = s.monolithic_rhs();
  s.apply_dirichlet(0, dofs, 0.5);
  EXPECT_EQ(s.monolithic(), M1);
  EXPECT_EQ(s.monolithic_rhs(), b1);
  EXPECT_TRUE(M1.is_symmetric(0.0));
  const auto x = s.split(solve_direct(M1, b1));
  EXPECT_DOUBLE_EQ(x[0][2], 0.5);
}

TEST(Eigen, SmallestNonzeroMatchesDenseSolver) {
  const auto sec = build_section_triangulation(0.0, 0.5, {OuterShape::Disk, 1.0}, 2, 12);
  const auto K = assemble_stiffness_2d(sec);
  const auto M = assemble_mass_2d(sec);
  const Vector ones(sec.vertices.size(), 1.0);
  const auto r = smallest_nonzero_gevp(K, M, ones);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(K), dense(M));
  // eigenvalues ascending; the first is the constant mode
  EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-9);
  EXPECT_NEAR(r.lambda, es.eigenvalues()(1), 1e-8 * es.eigenvalues()(1));
  const Vector Mu = M * r.vector;
  EXPECT_NEAR(dot(r.vector, Mu), 1.0, 1e-10);
  EXPECT_NEAR(dot(ones, Mu), 0.0, 1e-10);
}

TEST(Eigen, LargestMuInverseMatchesDenseSolver) {
  const auto sec = build_section_triangulation(0.0, 0.3, {OuterShape::Disk, 1.0}, 2, 12);
  const TetMesh m = extrude(sec, 1.0, 2, ExtrusionAxis::along_z());
  const auto A = add(assemble_stiffness(m, {}, TensorField(1.0), 0.0), assemble_mass(m, {}, ScalarField(1.0), 0.0));
  const auto B = assemble_facet_mass(m, FacetMarker::GammaS, ScalarField(1.0), 0.0);
  const auto r = largest_mu_inverse(A, B);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(B), dense(A));
  const double mu_max = es.eigenvalues().maxCoeff();
  EXPECT_NEAR(r.lambda, 1.0 / mu_max, 1e-8 / mu_max);
}
