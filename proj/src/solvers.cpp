#include "vasotrans/solvers.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

namespace vasotrans {

namespace {

using EigenCsc = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

EigenCsc to_eigen(const SparseMatrix& A) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nnz());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      t.emplace_back(static_cast<int>(r), A.col_idx()[k], A.values()[k]);
    }
  }
  EigenCsc M(static_cast<int>(A.rows()), static_cast<int>(A.cols()));
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();
  return M;
}

double residual_norm(const SparseMatrix& A, std::span<const double> x, std::span<const double> b) {
  Vector r = A * x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return norm2(r);
}

}  // namespace

struct LuSolver::Impl {
  // Symmetric matrices go through LDL^T, which fills far less than the
  // supernodal LU on 2D/3D meshes; everything else through LU.
  bool symmetric = false;
  Eigen::SimplicialLDLT<EigenCsc, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  Eigen::SparseLU<EigenCsc, Eigen::AMDOrdering<int>> lu;

  template <class Rhs>
  Eigen::VectorXd solve(const Rhs& b) const {
    if (symmetric) return ldlt.solve(b);
    return lu.solve(b);
  }
};

namespace {

double max_abs(const SparseMatrix& A) {
  double m = 0.0;
  for (double v : A.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

LuSolver::LuSolver() = default;
LuSolver::LuSolver(const SparseMatrix& A) { factorize(A); }
LuSolver::~LuSolver() = default;
LuSolver::LuSolver(LuSolver&&) noexcept = default;
LuSolver& LuSolver::operator=(LuSolver&&) noexcept = default;

void LuSolver::factorize(const SparseMatrix& A) {
  if (A.rows() != A.cols()) throw LinalgError("LU needs a square matrix");
  auto impl = std::make_unique<Impl>();
  const EigenCsc M = to_eigen(A);
  if (A.is_symmetric(1e-14 * max_abs(A))) {
    impl->ldlt.compute(M);
    impl->symmetric = impl->ldlt.info() == Eigen::Success;
    if (impl->symmetric) {
      // Zero pivots slip through LDL^T; treat them as failure.
      const auto d = impl->ldlt.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      impl->symmetric = dmax > 0.0 && d.cwiseAbs().minCoeff() > 1e-14 * dmax;
    }
  }
  if (!impl->symmetric) {
    impl->lu.analyzePattern(M);
    impl->lu.factorize(M);
    if (impl->lu.info() != Eigen::Success) {
      throw SolverError("singular matrix: " + impl->lu.lastErrorMessage());
    }
  }
  impl_ = std::move(impl);
  A_ = A;
}

bool residual_contract_holds(const SparseMatrix& A, std::span<const double> x, std::span<const double> b,
                             double factor) {
  return residual_norm(A, x, b) <= factor * (A.frobenius_norm() * norm2(x) + norm2(b));
}

Vector LuSolver::solve(std::span<const double> b) const {
  if (!impl_) throw LinalgError("LU solver used before factorization");
  if (b.size() != A_.rows()) throw LinalgError("right-hand side size mismatch");
  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::VectorXd x = impl_->solve(rhs);
  Vector out(x.data(), x.data() + x.size());
  if (!residual_contract_holds(A_, out, b)) {
    // One step of iterative refinement before giving up.
    Vector r = A_ * out;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    const Eigen::Map<const Eigen::VectorXd> rr(r.data(), static_cast<Eigen::Index>(r.size()));
    Eigen::VectorXd dx = impl_->solve(rr);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += dx[static_cast<Eigen::Index>(i)];
    if (!residual_contract_holds(A_, out, b)) {
      throw SolverError("direct solve violates the residual bound", residual_norm(A_, out, b));
    }
  }
  return out;
}

Vector LuSolver::solve_transpose(std::span<const double> c) const {
  if (!impl_) throw LinalgError("LU solver used before factorization");
  const Eigen::Map<const Eigen::VectorXd> rhs(c.data(), static_cast<Eigen::Index>(c.size()));
  Eigen::VectorXd y = impl_->symmetric ? impl_->ldlt.solve(rhs) : Eigen::VectorXd(impl_->lu.transpose().solve(rhs));
  Vector out(y.data(), y.data() + y.size());
  const SparseMatrix At = A_.transpose();
  if (!residual_contract_holds(At, out, c)) {
    throw SolverError("transpose solve violates the residual bound", residual_norm(At, out, c));
  }
  return out;
}

Vector solve_direct(const SparseMatrix& A, std::span<const double> b) {
  LuSolver lu(A);
  return lu.solve(b);
}

Ilu0::Ilu0(const SparseMatrix& A) : LU_(A), diag_(A.rows()) {
  const auto& rp = LU_.row_ptr();
  const auto& ci = LU_.col_idx();
  auto& v = LU_.values();
  const std::size_t n = A.rows();
  for (std::size_t i = 0; i < n; ++i) {
    diag_[i] = rp[i + 1];
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      if (ci[k] == static_cast<int>(i)) diag_[i] = k;
    }
    if (diag_[i] == rp[i + 1]) throw SolverError("ILU(0): missing diagonal in row " + std::to_string(i));
  }
  std::vector<std::ptrdiff_t> where(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) where[ci[k]] = static_cast<std::ptrdiff_t>(k);
    for (std::size_t k = rp[i]; k < rp[i + 1] && ci[k] < static_cast<int>(i); ++k) {
      const std::size_t j = ci[k];
      const double pivot = v[diag_[j]];
      if (pivot == 0.0) throw SolverError("ILU(0): zero pivot in row " + std::to_string(j));
      v[k] /= pivot;
      for (std::size_t q = diag_[j] + 1; q < rp[j + 1]; ++q) {
        const std::ptrdiff_t w = where[ci[q]];
        if (w >= 0) v[w] -= v[k] * v[q];
      }
    }
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) where[ci[k]] = -1;
  }
}

void Ilu0::apply(std::span<const double> r, std::span<double> z) const {
  const auto& rp = LU_.row_ptr();
  const auto& ci = LU_.col_idx();
  const auto& v = LU_.values();
  const std::size_t n = LU_.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = r[i];
    for (std::size_t k = rp[i]; k < diag_[i]; ++k) s -= v[k] * z[ci[k]];
    z[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = z[i];
    for (std::size_t k = diag_[i] + 1; k < rp[i + 1]; ++k) s -= v[k] * z[ci[k]];
    z[i] = s / v[diag_[i]];
  }
}

IterativeResult solve_iterative(const SparseMatrix& A, std::span<const double> b, const IterativeOptions& opt) {
  const std::size_t n = A.rows();
  if (A.cols() != n || b.size() != n) throw LinalgError("iterative solve size mismatch");
  IterativeResult res;
  res.x = opt.x0 ? *opt.x0 : Vector(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    return res;
  }

  std::unique_ptr<Ilu0> ilu;
  Vector inv_diag;
  if (opt.preconditioner == Preconditioner::Ilu0) ilu = std::make_unique<Ilu0>(A);
  if (opt.preconditioner == Preconditioner::Jacobi) {
    inv_diag = A.diagonal_values();
    for (double& d : inv_diag) {
      if (d == 0.0) throw SolverError("Jacobi: zero diagonal");
      d = 1.0 / d;
    }
  }
  auto precondition = [&](std::span<const double> in, std::span<double> out) {
    if (ilu) {
      ilu->apply(in, out);
    } else if (!inv_diag.empty()) {
      for (std::size_t i = 0; i < n; ++i) out[i] = inv_diag[i] * in[i];
    } else {
      std::copy(in.begin(), in.end(), out.begin());
    }
  };

  Vector r = A * res.x;
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  const Vector r_hat = r;
  Vector p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  double rel = norm2(r) / bnorm;
  for (int it = 1; it <= opt.max_iter && rel > opt.tol; ++it) {
    const double rho_new = dot(r_hat, r);
    if (rho_new == 0.0 || omega == 0.0) throw SolverError("BiCGSTAB breakdown", rel);
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    precondition(p, phat);
    A.multiply(phat, v);
    const double denom = dot(r_hat, v);
    if (denom == 0.0) throw SolverError("BiCGSTAB breakdown", rel);
    alpha = rho / denom;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    res.iterations = it;
    if (norm2(s) / bnorm <= opt.tol) {
      axpy(alpha, phat, res.x);
      rel = norm2(s) / bnorm;
      break;
    }
    precondition(s, shat);
    A.multiply(shat, t);
    const double tt = dot(t, t);
    if (tt == 0.0) throw SolverError("BiCGSTAB breakdown", rel);
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * phat[i] + omega * shat[i];
      r[i] = s[i] - omega * t[i];
    }
    rel = norm2(r) / bnorm;
  }
  // Report the true residual rather than the recurrence.
  Vector check = A * res.x;
  for (std::size_t i = 0; i < n; ++i) check[i] = b[i] - check[i];
  res.relative_residual = norm2(check) / bnorm;
  if (rel > opt.tol || res.relative_residual > opt.tol * 10.0) {
    throw SolverError("BiCGSTAB did not converge in " + std::to_string(opt.max_iter) + " iterations",
                      res.relative_residual);
  }
  return res;
}

}  // namespace vasotrans
