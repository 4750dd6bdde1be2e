#include "vasotrans/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace vasotrans {

void TripletList::append(const TripletList& o) {
  rows.insert(rows.end(), o.rows.begin(), o.rows.end());
  cols.insert(cols.end(), o.cols.begin(), o.cols.end());
  values.insert(values.end(), o.values.begin(), o.values.end());
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, const TripletList& t) {
  SparseMatrix A(rows, cols);
  const std::size_t n = t.size();
  // Stable bucket by row, then stable sort by column inside each row.
  std::vector<std::size_t> count(rows + 1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const int r = t.rows[k], c = t.cols[k];
    if (r < 0 || static_cast<std::size_t>(r) >= rows || c < 0 || static_cast<std::size_t>(c) >= cols) {
      throw LinalgError("triplet (" + std::to_string(r) + ", " + std::to_string(c) + ") out of range");
    }
    ++count[r + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) count[r + 1] += count[r];
  std::vector<std::size_t> order(n);
  {
    std::vector<std::size_t> pos(count.begin(), count.end() - 1);
    for (std::size_t k = 0; k < n; ++k) order[pos[t.rows[k]]++] = k;
  }
  A.col_idx_.reserve(n);
  A.values_.reserve(n);
  for (std::size_t r = 0; r < rows; ++r) {
    auto first = order.begin() + static_cast<std::ptrdiff_t>(count[r]);
    auto last = order.begin() + static_cast<std::ptrdiff_t>(count[r + 1]);
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return t.cols[a] < t.cols[b]; });
    for (auto it = first; it != last;) {
      const int c = t.cols[*it];
      double sum = 0.0;
      for (; it != last && t.cols[*it] == c; ++it) sum += t.values[*it];
      if (sum != 0.0) {
        A.col_idx_.push_back(c);
        A.values_.push_back(sum);
      }
    }
    A.row_ptr_[r + 1] = A.values_.size();
  }
  return A;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  const Vector ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> d) {
  SparseMatrix A(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] != 0.0) {
      A.col_idx_.push_back(static_cast<int>(i));
      A.values_.push_back(d[i]);
    }
    A.row_ptr_[i + 1] = A.values_.size();
  }
  return A;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<int>(c));
  if (it == last || *it != static_cast<int>(c)) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Vector SparseMatrix::diagonal_values() const {
  Vector d(std::min(rows_, cols_), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
  return d;
}

double SparseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double SparseMatrix::trace() const {
  double s = 0.0;
  for (double v : diagonal_values()) s += v;
  return s;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y, Execution ex) const {
  if (x.size() != cols_ || y.size() != rows_) throw LinalgError("matrix-vector size mismatch");
  const auto n = static_cast<std::ptrdiff_t>(rows_);
  if (ex == Execution::Parallel) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[r] = s;
    }
  } else {
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[r] = s;
    }
  }
}

Vector SparseMatrix::operator*(std::span<const double> x) const {
  Vector y(rows_);
  multiply(x, y);
  return y;
}

Vector SparseMatrix::multiply_transpose(std::span<const double> x) const {
  if (x.size() != rows_) throw LinalgError("transpose product size mismatch");
  Vector y(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y[col_idx_[k]] += values_[k] * x[r];
  }
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix T(cols_, rows_);
  std::vector<std::size_t> count(cols_ + 1, 0);
  for (int c : col_idx_) ++count[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) count[c + 1] += count[c];
  T.row_ptr_ = count;
  T.col_idx_.resize(nnz());
  T.values_.resize(nnz());
  std::vector<std::size_t> pos(count.begin(), count.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t p = pos[col_idx_[k]]++;
      T.col_idx_[p] = static_cast<int>(r);
      T.values_[p] = values_[k];
    }
  }
  return T;
}

SparseMatrix SparseMatrix::scaled(double s) const {
  SparseMatrix A = *this;
  for (double& v : A.values_) v *= s;
  if (s == 0.0) A.prune();
  return A;
}

void SparseMatrix::prune(double drop) {
  std::size_t out = 0;
  std::size_t start = 0;
  for (std::size_t r = 0; r < rows_; ++r) {
    const std::size_t end = row_ptr_[r + 1];
    for (std::size_t k = start; k < end; ++k) {
      if (values_[k] != 0.0 && std::abs(values_[k]) > drop) {
        col_idx_[out] = col_idx_[k];
        values_[out] = values_[k];
        ++out;
      }
    }
    start = end;
    row_ptr_[r + 1] = out;
  }
  col_idx_.resize(out);
  values_.resize(out);
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (std::abs(values_[k] - at(col_idx_[k], r)) > tol) return false;
    }
  }
  // Entries present only in the transpose.
  const SparseMatrix T = transpose();
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = T.row_ptr_[r]; k < T.row_ptr_[r + 1]; ++k) {
      if (std::abs(T.values_[k] - at(r, T.col_idx_[k])) > tol) return false;
    }
  }
  return true;
}

SparseMatrix add(const SparseMatrix& A, const SparseMatrix& B, double alpha, double beta) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw LinalgError("matrix sum size mismatch");
  TripletList t;
  t.reserve(A.nnz() + B.nnz());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      t.add(static_cast<int>(r), A.col_idx()[k], alpha * A.values()[k]);
    }
    for (std::size_t k = B.row_ptr()[r]; k < B.row_ptr()[r + 1]; ++k) {
      t.add(static_cast<int>(r), B.col_idx()[k], beta * B.values()[k]);
    }
  }
  return SparseMatrix::from_triplets(A.rows(), A.cols(), t);
}

SparseMatrix multiply(const SparseMatrix& A, const SparseMatrix& B) {
  if (A.cols() != B.rows()) throw LinalgError("matrix product size mismatch");
  TripletList t;
  std::vector<double> acc(B.cols(), 0.0);
  std::vector<int> mark(B.cols(), -1);
  std::vector<int> used;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    used.clear();
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      const int j = A.col_idx()[k];
      const double a = A.values()[k];
      for (std::size_t q = B.row_ptr()[j]; q < B.row_ptr()[j + 1]; ++q) {
        const int c = B.col_idx()[q];
        if (mark[c] != static_cast<int>(r)) {
          mark[c] = static_cast<int>(r);
          acc[c] = 0.0;
          used.push_back(c);
        }
        acc[c] += a * B.values()[q];
      }
    }
    std::sort(used.begin(), used.end());
    for (int c : used) t.add(static_cast<int>(r), c, acc[c]);
  }
  return SparseMatrix::from_triplets(A.rows(), B.cols(), t);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void dump_matrix_market(const SparseMatrix& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LinalgError("cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  out << A.rows() << ' ' << A.cols() << ' ' << A.nnz() << '\n';
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      out << r << ' ' << A.col_idx()[k] << ' ' << A.values()[k] << '\n';
    }
  }
  if (!out) throw LinalgError("write failed for '" + path + "'");
}

BlockSystem::BlockSystem(std::vector<std::pair<std::string, std::size_t>> fields) : fields_(std::move(fields)) {
  for (const auto& f : fields_) {
    offsets_.push_back(offsets_.back() + f.second);
    rhs_.emplace_back(f.second, 0.0);
  }
}

std::size_t BlockSystem::field_index(const std::string& name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].first == name) return i;
  }
  throw LinalgError("unknown field '" + name + "'");
}

void BlockSystem::add_block(std::size_t i, std::size_t j, const SparseMatrix& m, double scale) {
  if (m.rows() != field_size(i) || m.cols() != field_size(j)) {
    throw LinalgError("block (" + field_name(i) + ", " + field_name(j) + ") has inconsistent size");
  }
  auto it = blocks_.find({i, j});
  if (it == blocks_.end()) {
    blocks_.emplace(std::make_pair(i, j), scale == 1.0 ? m : m.scaled(scale));
  } else {
    it->second = add(it->second, m, 1.0, scale);
  }
}

const SparseMatrix& BlockSystem::block(std::size_t i, std::size_t j) const {
  auto it = blocks_.find({i, j});
  if (it == blocks_.end()) throw LinalgError("block (" + field_name(i) + ", " + field_name(j) + ") is empty");
  return it->second;
}

void BlockSystem::apply_dirichlet(std::size_t field, std::span<const int> dofs, double value) {
  const Vector values(dofs.size(), value);
  apply_dirichlet(field, dofs, values);
}

void BlockSystem::apply_dirichlet(std::size_t field, std::span<const int> dofs, std::span<const double> values) {
  if (field >= fields_.size()) throw LinalgError("unknown field index");
  std::vector<double> known(field_size(field), 0.0);
  std::vector<char> fixed(field_size(field), 0);
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    fixed[dofs[k]] = 1;
    known[dofs[k]] = values[k];
  }
  for (auto& [ij, A] : blocks_) {
    const auto [i, j] = ij;
    auto& vals = A.values();
    if (j == field) {
      // Move known columns to the right-hand side of every other row.
      for (std::size_t r = 0; r < A.rows(); ++r) {
        if (i == field && fixed[r]) continue;
        for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
          const int c = A.col_idx()[k];
          if (fixed[c]) {
            rhs_[i][r] -= vals[k] * known[c];
            vals[k] = 0.0;
          }
        }
      }
    }
    if (i == field) {
      for (std::size_t r = 0; r < A.rows(); ++r) {
        if (!fixed[r]) continue;
        for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
          vals[k] = (j == field && A.col_idx()[k] == static_cast<int>(r)) ? 1.0 : 0.0;
        }
      }
    }
  }
  // Diagonal entries missing from the pattern.
  TripletList diag;
  for (std::size_t r = 0; r < fixed.size(); ++r) {
    if (fixed[r] && (!has_block(field, field) || block(field, field).at(r, r) != 1.0)) {
      diag.add(static_cast<int>(r), static_cast<int>(r), 1.0);
    }
  }
  for (auto& [ij, A] : blocks_) A.prune();
  if (diag.size() > 0) {
    SparseMatrix D = SparseMatrix::from_triplets(field_size(field), field_size(field), diag);
    if (has_block(field, field)) {
      // Rows of fixed dofs are empty at this point, so adding sets the diagonal to 1.
      blocks_[{field, field}] = add(blocks_[{field, field}], D);
    } else {
      blocks_.emplace(std::make_pair(field, field), D);
    }
  }
  for (std::size_t r = 0; r < fixed.size(); ++r) {
    if (fixed[r]) rhs_[field][r] = known[r];
  }
}

SparseMatrix BlockSystem::monolithic() const {
  TripletList t;
  std::size_t nnz = 0;
  for (const auto& [ij, A] : blocks_) nnz += A.nnz();
  t.reserve(nnz);
  for (const auto& [ij, A] : blocks_) {
    const int ro = static_cast<int>(offsets_[ij.first]), co = static_cast<int>(offsets_[ij.second]);
    for (std::size_t r = 0; r < A.rows(); ++r) {
      for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
        t.add(ro + static_cast<int>(r), co + A.col_idx()[k], A.values()[k]);
      }
    }
  }
  return SparseMatrix::from_triplets(total_size(), total_size(), t);
}

Vector BlockSystem::monolithic_rhs() const {
  Vector b;
  b.reserve(total_size());
  for (const auto& r : rhs_) b.insert(b.end(), r.begin(), r.end());
  return b;
}

std::vector<Vector> BlockSystem::split(std::span<const double> x) const {
  if (x.size() != total_size()) throw LinalgError("solution size mismatch");
  std::vector<Vector> out;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    out.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                     x.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
  }
  return out;
}

}  // namespace vasotrans
