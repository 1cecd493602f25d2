#pragma once

/// \file
/// Compressed sparse row storage, permutations, and the deterministic
/// matrix-vector / matrix-multivector kernels every operator is built on.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nschur/dense.hpp"
#include "nschur/errors.hpp"

namespace nschur {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// CSR matrix. Symmetric matrices keep the full pattern (both triangles);
/// `symmetric()` records that (i,j,v) implies (j,i,v).
class SparseMatrix {
 public:
  SparseMatrix() : row_ptr_(1, 0) {}

  SparseMatrix(Index rows, Index cols, std::vector<Index> row_ptr, std::vector<Index> col_idx,
               std::vector<double> values, bool symmetric = false)
      : rows_(rows),
        cols_(cols),
        row_ptr_(std::move(row_ptr)),
        col_idx_(std::move(col_idx)),
        values_(std::move(values)),
        symmetric_(symmetric) {
    validate();
  }

  /// Builds from unordered triplets; duplicate (i,j) entries are summed.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> entries,
                                    bool symmetric = false) {
    for (const auto& t : entries) {
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw InvalidArgument("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                              ") out of bounds");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> row_ptr(static_cast<std::size_t>(rows) + 1, 0);
    std::vector<Index> col_idx;
    std::vector<double> values;
    col_idx.reserve(entries.size());
    values.reserve(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto& t = entries[e];
      if (!col_idx.empty() && e > 0 && entries[e - 1].row == t.row && entries[e - 1].col == t.col) {
        values.back() += t.value;
        continue;
      }
      col_idx.push_back(t.col);
      values.push_back(t.value);
      ++row_ptr[static_cast<std::size_t>(t.row) + 1];
    }
    std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
    SparseMatrix m(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values), false);
    if (symmetric) {
      if (!m.is_symmetric()) throw InvalidArgument("from_triplets: entries are not symmetric");
      m.symmetric_ = true;
    }
    return m;
  }

  static SparseMatrix identity(Index n) {
    std::vector<Index> rp(static_cast<std::size_t>(n) + 1);
    std::iota(rp.begin(), rp.end(), Index{0});
    std::vector<Index> ci(static_cast<std::size_t>(n));
    std::iota(ci.begin(), ci.end(), Index{0});
    return SparseMatrix(n, n, std::move(rp), std::move(ci), std::vector<double>(static_cast<std::size_t>(n), 1.0),
                        true);
  }

  static SparseMatrix from_dense(const DenseBlock& d, bool symmetric = false, double drop = 0.0) {
    std::vector<Triplet> t;
    for (Index i = 0; i < d.rows(); ++i)
      for (Index j = 0; j < d.cols(); ++j)
        if (std::abs(d(i, j)) > drop) t.push_back({i, j, d(i, j)});
    return from_triplets(d.rows(), d.cols(), std::move(t), symmetric);
  }

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index n() const {
    if (rows_ != cols_) throw InvalidArgument("n() requested on a rectangular matrix");
    return rows_;
  }
  Index nnz() const noexcept { return static_cast<Index>(col_idx_.size()); }
  bool symmetric() const noexcept { return symmetric_; }

  std::span<const Index> row_ptr() const noexcept { return row_ptr_; }
  std::span<const Index> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const Index> row_cols(Index i) const noexcept {
    return {col_idx_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
  }
  std::span<const double> row_values(Index i) const noexcept {
    return {values_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
  }

  double coeff(Index i, Index j) const {
    auto cols = row_cols(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(row_ptr_[i] + (it - cols.begin()))];
  }

  DenseBlock to_dense() const {
    DenseBlock d = DenseBlock::Zero(rows_, cols_);
    for (Index i = 0; i < rows_; ++i)
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) d(i, col_idx_[p]) = values_[p];
    return d;
  }

  SparseMatrix transpose() const {
    std::vector<Index> rp(static_cast<std::size_t>(cols_) + 1, 0);
    for (Index c : col_idx_) ++rp[static_cast<std::size_t>(c) + 1];
    std::partial_sum(rp.begin(), rp.end(), rp.begin());
    std::vector<Index> next(rp.begin(), rp.end() - 1);
    std::vector<Index> ci(col_idx_.size());
    std::vector<double> v(values_.size());
    for (Index i = 0; i < rows_; ++i) {
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const Index dst = next[col_idx_[p]]++;
        ci[dst] = i;
        v[dst] = values_[p];
      }
    }
    return SparseMatrix(cols_, rows_, std::move(rp), std::move(ci), std::move(v), symmetric_);
  }

  /// Exact structural and numerical symmetry check (independent of the flag).
  bool is_symmetric() const {
    if (rows_ != cols_) return false;
    for (Index i = 0; i < rows_; ++i) {
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const Index j = col_idx_[p];
        auto cols = row_cols(j);
        auto it = std::lower_bound(cols.begin(), cols.end(), i);
        if (it == cols.end() || *it != i) return false;
        if (values_[row_ptr_[j] + (it - cols.begin())] != values_[p]) return false;
      }
    }
    return true;
  }

  Vector diagonal() const {
    Vector d = Vector::Zero(std::min(rows_, cols_));
    for (Index i = 0; i < d.size(); ++i) d(i) = coeff(i, i);
    return d;
  }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ && a.col_idx_ == b.col_idx_ &&
           a.values_ == b.values_;
  }

 private:
  void validate() const {
    if (rows_ < 0 || cols_ < 0) throw InvalidArgument("negative matrix dimension");
    if (row_ptr_.size() != static_cast<std::size_t>(rows_) + 1) throw InvalidArgument("row_ptr length != rows + 1");
    if (row_ptr_.front() != 0) throw InvalidArgument("row_ptr must start at 0");
    if (col_idx_.size() != values_.size()) throw InvalidArgument("col_idx and values differ in length");
    if (static_cast<std::size_t>(row_ptr_.back()) != col_idx_.size())
      throw InvalidArgument("row_ptr end != nnz");
    for (Index i = 0; i < rows_; ++i) {
      if (row_ptr_[i + 1] < row_ptr_[i]) throw InvalidArgument("row_ptr decreasing at row " + std::to_string(i));
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        if (col_idx_[p] < 0 || col_idx_[p] >= cols_)
          throw InvalidArgument("column index out of range in row " + std::to_string(i));
        if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1])
          throw InvalidArgument("column indices not strictly increasing in row " + std::to_string(i));
      }
    }
    if (symmetric_ && !is_symmetric()) throw InvalidArgument("matrix flagged symmetric has asymmetric entries");
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_;
  std::vector<Index> col_idx_;
  std::vector<double> values_;
  bool symmetric_ = false;
};

/// perm[new] = old, inverse[old] = new.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<Index> perm) : perm_(std::move(perm)), inverse_(perm_.size(), -1) {
    const auto n = static_cast<Index>(perm_.size());
    for (Index i = 0; i < n; ++i) {
      const Index old = perm_[i];
      if (old < 0 || old >= n || inverse_[old] != -1)
        throw InvalidPermutation("not a bijection on [0, " + std::to_string(n) + ")");
      inverse_[old] = i;
    }
  }

  static Permutation identity(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), Index{0});
    return Permutation(std::move(p));
  }

  Index size() const noexcept { return static_cast<Index>(perm_.size()); }
  std::span<const Index> perm() const noexcept { return perm_; }
  std::span<const Index> inverse() const noexcept { return inverse_; }

  /// y[new] = x[perm[new]]
  template <class Derived>
  DenseBlock apply(const Eigen::MatrixBase<Derived>& x) const {
    check_rows("Permutation::apply", size(), x.rows());
    DenseBlock y(x.rows(), x.cols());
    for (Index i = 0; i < size(); ++i) y.row(i) = x.row(perm_[i]);
    return y;
  }

  /// x[perm[new]] = y[new]
  template <class Derived>
  DenseBlock apply_inverse(const Eigen::MatrixBase<Derived>& y) const {
    check_rows("Permutation::apply_inverse", size(), y.rows());
    DenseBlock x(y.rows(), y.cols());
    for (Index i = 0; i < size(); ++i) x.row(perm_[i]) = y.row(i);
    return x;
  }

  friend bool operator==(const Permutation& a, const Permutation& b) { return a.perm_ == b.perm_; }

 private:
  std::vector<Index> perm_;
  std::vector<Index> inverse_;
};

namespace detail {

inline double row_dot(const SparseMatrix& A, Index i, const double* x) {
  const auto rp = A.row_ptr();
  const auto ci = A.col_idx();
  const auto v = A.values();
  double s = 0.0;
  for (Index p = rp[i]; p < rp[i + 1]; ++p) s += v[p] * x[ci[p]];
  return s;
}

}  // namespace detail

/// y = A x with left-to-right accumulation inside each row.
inline Vector spmv(const SparseMatrix& A, const Vector& x) {
  check_rows("spmv", A.cols(), x.size());
  Vector y(A.rows());
  for (Index i = 0; i < A.rows(); ++i) y(i) = detail::row_dot(A, i, x.data());
  return y;
}

/// Column c of the result is spmv(A, X.col(c)), bit for bit.
inline DenseBlock spmm(const SparseMatrix& A, const DenseBlock& X) {
  check_rows("spmm", A.cols(), X.rows());
  DenseBlock Y(A.rows(), X.cols());
  for (Index c = 0; c < X.cols(); ++c) {
    const double* x = X.col(c).data();
    for (Index i = 0; i < A.rows(); ++i) Y(i, c) = detail::row_dot(A, i, x);
  }
  return Y;
}

/// result(i, j) = A(perm[i], perm[j]).
inline SparseMatrix permute_symmetric(const SparseMatrix& A, const Permutation& P) {
  if (P.size() != A.rows() || A.rows() != A.cols())
    throw InvalidPermutation("permutation size " + std::to_string(P.size()) + " does not match matrix");
  const Index n = A.rows();
  const auto perm = P.perm();
  const auto inv = P.inverse();
  std::vector<Index> rp(static_cast<std::size_t>(n) + 1, 0);
  for (Index i = 0; i < n; ++i) rp[i + 1] = rp[i] + (A.row_ptr()[perm[i] + 1] - A.row_ptr()[perm[i]]);
  std::vector<Index> ci(static_cast<std::size_t>(A.nnz()));
  std::vector<double> v(static_cast<std::size_t>(A.nnz()));
  std::vector<std::pair<Index, double>> row;
  for (Index i = 0; i < n; ++i) {
    const auto cols = A.row_cols(perm[i]);
    const auto vals = A.row_values(perm[i]);
    row.clear();
    for (std::size_t q = 0; q < cols.size(); ++q) row.emplace_back(inv[cols[q]], vals[q]);
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t q = 0; q < row.size(); ++q) {
      ci[rp[i] + static_cast<Index>(q)] = row[q].first;
      v[rp[i] + static_cast<Index>(q)] = row[q].second;
    }
  }
  return SparseMatrix(n, n, std::move(rp), std::move(ci), std::move(v), A.symmetric());
}

/// Contiguous sub-block A[r0:r1, c0:c1].
inline SparseMatrix slice(const SparseMatrix& A, Index r0, Index r1, Index c0, Index c1, bool symmetric = false) {
  std::vector<Index> rp(static_cast<std::size_t>(r1 - r0) + 1, 0);
  std::vector<Index> ci;
  std::vector<double> v;
  for (Index i = r0; i < r1; ++i) {
    const auto cols = A.row_cols(i);
    const auto vals = A.row_values(i);
    auto lo = std::lower_bound(cols.begin(), cols.end(), c0);
    auto hi = std::lower_bound(cols.begin(), cols.end(), c1);
    for (auto it = lo; it != hi; ++it) {
      ci.push_back(*it - c0);
      v.push_back(vals[static_cast<std::size_t>(it - cols.begin())]);
    }
    rp[i - r0 + 1] = static_cast<Index>(ci.size());
  }
  return SparseMatrix(r1 - r0, c1 - c0, std::move(rp), std::move(ci), std::move(v), symmetric);
}

}  // namespace nschur
