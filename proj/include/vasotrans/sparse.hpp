#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vasotrans/parallel.hpp"

namespace vasotrans {

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Unordered (row, col, value) entries; duplicates are summed in insertion order.
struct TripletList {
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<double> values;

  void add(int r, int c, double v) {
    rows.push_back(r);
    cols.push_back(c);
    values.push_back(v);
  }
  void reserve(std::size_t n) {
    rows.reserve(n);
    cols.reserve(n);
    values.reserve(n);
  }
  void append(const TripletList& o);
  std::size_t size() const { return values.size(); }
};

/// Compressed-row matrix with sorted, unique column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Duplicates summed in triplet order (bit-deterministic); entries summing to
  /// exactly zero are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, const TripletList& t);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double at(std::size_t r, std::size_t c) const;
  Vector diagonal_values() const;
  double frobenius_norm() const;
  double trace() const;

  void multiply(std::span<const double> x, std::span<double> y, Execution ex = Execution::Serial) const;
  Vector operator*(std::span<const double> x) const;
  /// y = A^T x.
  Vector multiply_transpose(std::span<const double> x) const;

  SparseMatrix transpose() const;
  SparseMatrix scaled(double s) const;
  /// Removes stored zeros and entries with |a| <= drop.
  void prune(double drop = 0.0);
  bool is_symmetric(double tol) const;

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// alpha A + beta B.
SparseMatrix add(const SparseMatrix& A, const SparseMatrix& B, double alpha = 1.0, double beta = 1.0);
/// Sparse product A B.
SparseMatrix multiply(const SparseMatrix& A, const SparseMatrix& B);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double a, std::span<const double> x, std::span<double> y);

/// Row, column, value triplets (0-based), one per line after a size header.
void dump_matrix_market(const SparseMatrix& A, const std::string& path);

/// k x k grid of sparse blocks with per-field right-hand sides.
class BlockSystem {
 public:
  BlockSystem() = default;
  explicit BlockSystem(std::vector<std::pair<std::string, std::size_t>> fields);

  std::size_t num_fields() const { return fields_.size(); }
  std::size_t field_index(const std::string& name) const;
  const std::string& field_name(std::size_t i) const { return fields_[i].first; }
  std::size_t field_size(std::size_t i) const { return fields_[i].second; }
  std::size_t field_offset(std::size_t i) const { return offsets_[i]; }
  std::size_t total_size() const { return offsets_.back(); }

  /// Adds to block (i, j); creates it if absent.
  void add_block(std::size_t i, std::size_t j, const SparseMatrix& m, double scale = 1.0);
  bool has_block(std::size_t i, std::size_t j) const { return blocks_.count({i, j}) > 0; }
  const SparseMatrix& block(std::size_t i, std::size_t j) const;
  Vector& rhs(std::size_t i) { return rhs_[i]; }
  const Vector& rhs(std::size_t i) const { return rhs_[i]; }

  /// Symmetric elimination of dofs of field i: rows and columns zeroed,
  /// unit diagonal, known values moved to the right-hand side. Idempotent.
  void apply_dirichlet(std::size_t field, std::span<const int> dofs, double value);
  void apply_dirichlet(std::size_t field, std::span<const int> dofs, std::span<const double> values);

  SparseMatrix monolithic() const;
  Vector monolithic_rhs() const;
  std::vector<Vector> split(std::span<const double> x) const;

 private:
  std::vector<std::pair<std::string, std::size_t>> fields_;
  std::vector<std::size_t> offsets_{0};
  std::map<std::pair<std::size_t, std::size_t>, SparseMatrix> blocks_;
  std::vector<Vector> rhs_;
};

}  // namespace vasotrans
