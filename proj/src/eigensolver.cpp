#include "vasotrans/eigensolver.hpp"

#include <cmath>
#include <random>

#include "vasotrans/solvers.hpp"

namespace vasotrans {

namespace {

Vector start_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

// x <- x - (k^T B x / k^T B k) k
void deflate(Vector& x, const Vector& k, const Vector& Bk, double kBk) {
  const double c = dot(Bk, x) / kBk;
  axpy(-c, k, x);
}

void scale_to_unit(Vector& x, const SparseMatrix& W) {
  const double n = std::sqrt(dot(x, W * x));
  if (!(n > 0.0)) throw LinalgError("eigen iteration collapsed to the zero vector");
  for (double& v : x) v /= n;
}

}  // namespace

EigenResult smallest_nonzero_gevp(const SparseMatrix& A, const SparseMatrix& B, const std::optional<Vector>& kernel,
                                  const EigenOptions& opt) {
  const std::size_t n = A.rows();
  if (A.cols() != n || B.rows() != n || B.cols() != n) throw LinalgError("eigenproblem size mismatch");
  const double sigma = opt.shift_factor * A.trace() / static_cast<double>(n);
  const LuSolver lu(add(A, B, 1.0, sigma));

  Vector Bk;
  double kBk = 0.0;
  if (kernel) {
    if (kernel->size() != n) throw LinalgError("kernel vector size mismatch");
    Bk = B * *kernel;
    kBk = dot(*kernel, Bk);
    if (!(kBk > 0.0)) throw LinalgError("kernel vector has zero B-norm");
  }

  EigenResult res;
  Vector x = start_vector(n, opt.seed);
  if (kernel) deflate(x, *kernel, Bk, kBk);
  scale_to_unit(x, B);
  double lambda_old = dot(x, A * x);
  for (int it = 1; it <= opt.max_iter; ++it) {
    x = lu.solve(B * x);
    if (kernel) deflate(x, *kernel, Bk, kBk);
    scale_to_unit(x, B);
    const double lambda = dot(x, A * x);
    res.iterations = it;
    if (std::abs(lambda - lambda_old) <= opt.tol * std::abs(lambda)) {
      res.lambda = lambda;
      res.vector = std::move(x);
      return res;
    }
    lambda_old = lambda;
  }
  throw LinalgError("eigen solver did not converge after " + std::to_string(opt.max_iter) + " iterations");
}

EigenResult largest_mu_inverse(const SparseMatrix& A, const SparseMatrix& B, const EigenOptions& opt) {
  const std::size_t n = A.rows();
  if (A.cols() != n || B.rows() != n || B.cols() != n) throw LinalgError("eigenproblem size mismatch");
  const LuSolver lu(A);
  EigenResult res;
  Vector x = start_vector(n, opt.seed);
  scale_to_unit(x, A);
  double mu_old = dot(x, B * x);
  for (int it = 1; it <= opt.max_iter; ++it) {
    x = lu.solve(B * x);
    scale_to_unit(x, A);
    const double mu = dot(x, B * x);
    res.iterations = it;
    if (!(mu > 0.0)) throw LinalgError("boundary mass vanishes on the iterate");
    if (std::abs(mu - mu_old) <= opt.tol * std::abs(mu)) {
      res.lambda = 1.0 / mu;
      res.vector = std::move(x);
      return res;
    }
    mu_old = mu;
  }
  throw LinalgError("eigen solver did not converge after " + std::to_string(opt.max_iter) + " iterations");
}

}  // namespace vasotrans
