#pragma once

/// \file
/// Cholesky factorizations A = R^T R.
///
/// Sparse path: up-looking factorization (one row of L = R^T per step) driven
/// by the elimination tree; the row pattern of step k is the etree reach of
/// the nonzeros of A(0:k-1, k). Dense path is used for orders up to
/// `dense_threshold`. An optional reverse Cuthill-McKee ordering is applied
/// before factorizing; the solves hide it so that forward/backward still
/// compose to A^{-1}.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <vector>

#include "nschur/partition.hpp"
#include "nschur/sparse_matrix.hpp"

namespace nschur {

struct CholeskyOptions {
  Index dense_threshold = 512;
  bool reverse_cuthill_mckee = false;
};

struct FillStats {
  Index nnz_matrix = 0;  // lower triangle incl. diagonal
  Index nnz_factor = 0;
};

/// Elimination tree of a symmetric matrix (full storage); parent[root] = -1.
inline std::vector<Index> elimination_tree(const SparseMatrix& A) {
  const Index n = A.n();
  std::vector<Index> parent(static_cast<std::size_t>(n), -1);
  std::vector<Index> ancestor(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    for (Index i : A.row_cols(k)) {
      while (i != -1 && i < k) {
        const Index next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) parent[i] = k;
        i = next;
      }
    }
  }
  return parent;
}

/// Reverse Cuthill-McKee ordering (perm[new] = old).
inline Permutation reverse_cuthill_mckee(const SparseMatrix& A) {
  const Index n = A.n();
  std::vector<Index> degree(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) degree[i] = static_cast<Index>(A.row_cols(i).size());
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(n));
  std::vector<Index> by_degree(static_cast<std::size_t>(n));
  std::iota(by_degree.begin(), by_degree.end(), Index{0});
  std::stable_sort(by_degree.begin(), by_degree.end(), [&](Index a, Index b) { return degree[a] < degree[b]; });
  for (Index start : by_degree) {
    if (seen[start]) continue;
    std::queue<Index> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      const Index v = q.front();
      q.pop();
      order.push_back(v);
      std::vector<Index> nb;
      for (Index u : A.row_cols(v))
        if (!seen[u]) {
          seen[u] = 1;
          nb.push_back(u);
        }
      std::stable_sort(nb.begin(), nb.end(), [&](Index a, Index b) { return degree[a] < degree[b]; });
      for (Index u : nb) q.push(u);
    }
  }
  std::reverse(order.begin(), order.end());
  return Permutation(std::move(order));
}

enum class SolveMode { full_solve, forward_only, backward_only };

class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  /// Throws NotPositiveDefinite carrying the (original-numbering when unpermuted) pivot index.
  static CholeskyFactor factor(const SparseMatrix& A, const CholeskyOptions& opt = {}) {
    CholeskyFactor f;
    f.n_ = A.n();
    f.stats_.nnz_matrix = (A.nnz() + f.n_) / 2;
    const SparseMatrix* M = &A;
    SparseMatrix permuted;
    if (opt.reverse_cuthill_mckee && f.n_ > 0) {
      f.ordering_ = reverse_cuthill_mckee(A);
      permuted = permute_symmetric(A, *f.ordering_);
      M = &permuted;
    }
    try {
      if (f.n_ <= opt.dense_threshold)
        f.factor_dense(*M);
      else
        f.factor_sparse(*M);
    } catch (const NotPositiveDefinite& e) {
      const Index pivot = f.ordering_ ? f.ordering_->perm()[e.pivot] : e.pivot;
      throw NotPositiveDefinite(pivot);
    }
    return f;
  }

  Index n() const noexcept { return n_; }
  bool is_dense() const noexcept { return dense_; }
  const FillStats& fill_stats() const noexcept { return stats_; }

  /// Upper-triangular R as a dense matrix (tests and small problems).
  DenseBlock R_dense() const {
    if (dense_) return R_;
    DenseBlock R = DenseBlock::Zero(n_, n_);
    for (Index j = 0; j < n_; ++j)
      for (Index p = Lp_[j]; p < Lp_[j + 1]; ++p) R(j, Li_[p]) = Lx_[p];
    return R;
  }

  /// full_solve: A^{-1} B; forward_only: R^{-T} B; backward_only: R^{-1} B.
  DenseBlock solve(const DenseBlock& B, SolveMode mode = SolveMode::full_solve) const {
    check_rows("CholeskyFactor::solve", n_, B.rows());
    switch (mode) {
      case SolveMode::forward_only:
        return forward(B);
      case SolveMode::backward_only:
        return backward(B);
      case SolveMode::full_solve:
      default:
        return backward(forward(B));
    }
  }

 private:
  DenseBlock forward(const DenseBlock& B) const {
    DenseBlock X = ordering_ ? ordering_->apply(B) : B;
    if (dense_) {
      R_.triangularView<Eigen::Upper>().transpose().solveInPlace(X);
      return X;
    }
    for (Index c = 0; c < X.cols(); ++c) {
      double* x = X.col(c).data();
      for (Index j = 0; j < n_; ++j) {
        x[j] /= Lx_[Lp_[j]];
        const double xj = x[j];
        for (Index p = Lp_[j] + 1; p < Lp_[j + 1]; ++p) x[Li_[p]] -= Lx_[p] * xj;
      }
    }
    return X;
  }

  DenseBlock backward(const DenseBlock& B) const {
    DenseBlock X = B;
    if (dense_) {
      R_.triangularView<Eigen::Upper>().solveInPlace(X);
    } else {
      for (Index c = 0; c < X.cols(); ++c) {
        double* x = X.col(c).data();
        for (Index j = n_ - 1; j >= 0; --j) {
          double s = x[j];
          for (Index p = Lp_[j] + 1; p < Lp_[j + 1]; ++p) s -= Lx_[p] * x[Li_[p]];
          x[j] = s / Lx_[Lp_[j]];
        }
      }
    }
    return ordering_ ? ordering_->apply_inverse(X) : X;
  }

  void factor_dense(const SparseMatrix& A) {
    dense_ = true;
    const DenseBlock a = A.to_dense();
    R_ = DenseBlock::Zero(n_, n_);
    for (Index j = 0; j < n_; ++j) {
      const double d = a(j, j) - R_.col(j).head(j).squaredNorm();
      if (!(d > 0.0)) throw NotPositiveDefinite(j);
      const double rjj = std::sqrt(d);
      R_(j, j) = rjj;
      if (j + 1 < n_) {
        const Index rest = n_ - j - 1;
        Eigen::RowVectorXd row = a.row(j).tail(rest) - R_.col(j).head(j).transpose() * R_.block(0, j + 1, j, rest);
        R_.row(j).tail(rest) = row / rjj;
      }
    }
    stats_.nnz_factor = n_ * (n_ + 1) / 2;
  }

  void factor_sparse(const SparseMatrix& A) {
    dense_ = false;
    const std::vector<Index> parent = elimination_tree(A);
    std::vector<Index> stack(static_cast<std::size_t>(n_));
    std::vector<Index> mark(static_cast<std::size_t>(n_), -1);

    // Reach of row k in the etree: the pattern of L(k, 0:k-1), in topological order.
    auto ereach = [&](Index k) {
      Index top = n_;
      mark[k] = k;
      std::vector<Index> path;
      for (Index i : A.row_cols(k)) {
        if (i >= k) continue;
        path.clear();
        for (; mark[i] != k; i = parent[i]) {
          path.push_back(i);
          mark[i] = k;
        }
        while (!path.empty()) {
          stack[--top] = path.back();
          path.pop_back();
        }
      }
      return top;
    };

    // Symbolic: column counts of L.
    std::vector<Index> count(static_cast<std::size_t>(n_), 1);
    for (Index k = 0; k < n_; ++k) {
      const Index top = ereach(k);
      for (Index p = top; p < n_; ++p) ++count[stack[p]];
    }
    Lp_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (Index j = 0; j < n_; ++j) Lp_[j + 1] = Lp_[j] + count[j];
    Li_.assign(static_cast<std::size_t>(Lp_[n_]), 0);
    Lx_.assign(static_cast<std::size_t>(Lp_[n_]), 0.0);
    std::vector<Index> next(Lp_.begin(), Lp_.end() - 1);
    std::fill(mark.begin(), mark.end(), -1);

    // Numeric: row k of L via a sparse triangular solve against the columns built so far.
    std::vector<double> x(static_cast<std::size_t>(n_), 0.0);
    for (Index k = 0; k < n_; ++k) {
      const Index top = ereach(k);
      x[k] = 0.0;
      const auto cols = A.row_cols(k);
      const auto vals = A.row_values(k);
      for (std::size_t q = 0; q < cols.size(); ++q)
        if (cols[q] <= k) x[cols[q]] = vals[q];
      double d = x[k];
      x[k] = 0.0;
      for (Index p = top; p < n_; ++p) {
        const Index i = stack[p];
        const double lki = x[i] / Lx_[Lp_[i]];
        x[i] = 0.0;
        for (Index q = Lp_[i] + 1; q < next[i]; ++q) x[Li_[q]] -= Lx_[q] * lki;
        d -= lki * lki;
        const Index q = next[i]++;
        Li_[q] = k;
        Lx_[q] = lki;
      }
      if (!(d > 0.0)) throw NotPositiveDefinite(k);
      const Index q = next[k]++;
      Li_[q] = k;
      Lx_[q] = std::sqrt(d);
    }
    stats_.nnz_factor = Lp_[n_];
  }

  Index n_ = 0;
  bool dense_ = true;
  DenseBlock R_;             // dense path
  std::vector<Index> Lp_;    // sparse path: L = R^T, column-compressed, diagonal first
  std::vector<Index> Li_;
  std::vector<double> Lx_;
  std::optional<Permutation> ordering_;
  FillStats stats_;
};

/// Independent Cholesky factors of the diagonal blocks of A_I.
class BlockDiagFactor {
 public:
  BlockDiagFactor() = default;
  BlockDiagFactor(std::vector<CholeskyFactor> factors, std::vector<Index> offsets)
      : factors_(std::move(factors)), offsets_(std::move(offsets)) {
    if (offsets_.size() != factors_.size() + 1) throw InvalidArgument("offsets must have one more entry than factors");
    for (std::size_t b = 0; b < factors_.size(); ++b)
      if (offsets_[b + 1] - offsets_[b] != factors_[b].n())
        throw DimensionMismatch("block factor size", offsets_[b + 1] - offsets_[b], factors_[b].n());
  }

  Index n() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  Index n_blocks() const noexcept { return static_cast<Index>(factors_.size()); }
  const CholeskyFactor& block(Index b) const { return factors_.at(static_cast<std::size_t>(b)); }
  std::span<const Index> offsets() const noexcept { return offsets_; }

  DenseBlock solve(const DenseBlock& B, SolveMode mode = SolveMode::full_solve) const {
    check_rows("BlockDiagFactor::solve", n(), B.rows());
    DenseBlock X(B.rows(), B.cols());
    for (std::size_t b = 0; b < factors_.size(); ++b) {
      const Index lo = offsets_[b], len = offsets_[b + 1] - offsets_[b];
      X.middleRows(lo, len) = factors_[b].solve(B.middleRows(lo, len), mode);
    }
    return X;
  }

 private:
  std::vector<CholeskyFactor> factors_;
  std::vector<Index> offsets_{0};
};

inline CholeskyFactor cholesky_factor(const SparseMatrix& A, const CholeskyOptions& opt = {}) {
  return CholeskyFactor::factor(A, opt);
}

/// Factors every interior block; failures name the block.
inline BlockDiagFactor block_diag_factor(const DBBDSystem& sys, const CholeskyOptions& opt = {}) {
  std::vector<CholeskyFactor> factors;
  factors.reserve(sys.interior_blocks.size());
  for (std::size_t b = 0; b < sys.interior_blocks.size(); ++b) {
    try {
      factors.push_back(CholeskyFactor::factor(sys.interior_blocks[b], opt));
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(e.pivot, static_cast<Index>(b));
    }
  }
  return BlockDiagFactor(std::move(factors), sys.block_offsets);
}

template <class Factor>
DenseBlock tri_solve_multi(const Factor& F, const DenseBlock& B, SolveMode mode = SolveMode::full_solve) {
  return F.solve(B, mode);
}

}  // namespace nschur
