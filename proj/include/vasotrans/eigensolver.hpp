#pragma once

#include <optional>

#include "vasotrans/sparse.hpp"

namespace vasotrans {

struct EigenOptions {
  double tol = 1e-10;  // relative change of the Rayleigh quotient
  int max_iter = 10000;
  /// Shift factor: sigma = shift_factor * trace(A) / n.
  double shift_factor = 1e-8;
  /// Deterministic start vector seed.
  unsigned seed = 12345;
};

struct EigenResult {
  double lambda = 0.0;
  Vector vector;  // B-normalized (u^T B u = 1)
  int iterations = 0;
};

/// Smallest eigenvalue of A u = lambda B u whose eigenvector is not in the
/// supplied kernel, by shift-invert inverse iteration on A + sigma B with
/// B-orthogonal deflation of the kernel vector at every step.
EigenResult smallest_nonzero_gevp(const SparseMatrix& A, const SparseMatrix& B,
                                  const std::optional<Vector>& kernel = std::nullopt, const EigenOptions& opt = {});

/// Largest mu of B u = mu A u for SPD A (B may be singular); returns
/// lambda = 1/mu with the eigenvector normalized so that u^T A u = 1.
EigenResult largest_mu_inverse(const SparseMatrix& A, const SparseMatrix& B, const EigenOptions& opt = {});

}  // namespace vasotrans
