#pragma once

#include <memory>
#include <optional>

#include "vasotrans/sparse.hpp"

namespace vasotrans {

class SolverError : public LinalgError {
 public:
  SolverError(const std::string& what, double residual = 0.0) : LinalgError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Sparse LU with approximate-minimum-degree column ordering and partial
/// pivoting. Keeps the factors so repeated solves reuse them.
class LuSolver {
 public:
  LuSolver();
  explicit LuSolver(const SparseMatrix& A);
  ~LuSolver();
  LuSolver(LuSolver&&) noexcept;
  LuSolver& operator=(LuSolver&&) noexcept;

  void factorize(const SparseMatrix& A);
  bool factorized() const { return impl_ != nullptr; }
  /// Solves A x = b and checks the residual contract.
  Vector solve(std::span<const double> b) const;
  /// Solves A^T y = c.
  Vector solve_transpose(std::span<const double> c) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SparseMatrix A_;
};

Vector solve_direct(const SparseMatrix& A, std::span<const double> b);

/// Relative residual bound used for direct solves:
/// |Ax - b| <= 1e-10 (|A|_F |x| + |b|).
bool residual_contract_holds(const SparseMatrix& A, std::span<const double> x, std::span<const double> b,
                             double factor = 1e-10);

enum class Preconditioner { None, Jacobi, Ilu0 };

struct IterativeOptions {
  Preconditioner preconditioner = Preconditioner::Ilu0;
  double tol = 1e-10;
  int max_iter = 5000;
  std::optional<Vector> x0;
};

struct IterativeResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned BiCGSTAB. Throws SolverError on breakdown or when
/// max_iter is reached.
IterativeResult solve_iterative(const SparseMatrix& A, std::span<const double> b, const IterativeOptions& opt = {});

/// Incomplete LU with zero fill on the pattern of A.
class Ilu0 {
 public:
  explicit Ilu0(const SparseMatrix& A);
  void apply(std::span<const double> r, std::span<double> z) const;

 private:
  SparseMatrix LU_;
  std::vector<std::size_t> diag_;
};

}  // namespace vasotrans
