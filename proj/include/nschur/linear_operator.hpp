#pragma once

#include <functional>
#include <memory>
#include <utility>

#include "nschur/dense.hpp"
#include "nschur/sparse_matrix.hpp"

namespace nschur {

/// Symmetric operator applied to blocks of column vectors.
struct LinearOperator {
  Index dim = 0;
  std::function<DenseBlock(const DenseBlock&)> apply_fn;

  DenseBlock apply(const DenseBlock& X) const {
    check_rows("LinearOperator::apply", dim, X.rows());
    return apply_fn(X);
  }
  Vector apply(const Vector& x) const {
    DenseBlock X = x;
    return apply(X).col(0);
  }
  explicit operator bool() const noexcept { return static_cast<bool>(apply_fn); }
};

inline LinearOperator make_operator(Index dim, std::function<DenseBlock(const DenseBlock&)> f) {
  return LinearOperator{dim, std::move(f)};
}

inline LinearOperator sparse_operator(const SparseMatrix& A) {
  return LinearOperator{A.n(), [&A](const DenseBlock& X) { return spmm(A, X); }};
}

inline LinearOperator sparse_operator_owned(SparseMatrix A) {
  auto shared = std::make_shared<SparseMatrix>(std::move(A));
  const Index n = shared->n();
  return LinearOperator{n, [shared](const DenseBlock& X) { return spmm(*shared, X); }};
}

inline LinearOperator dense_operator(DenseBlock M) {
  const Index n = M.rows();
  auto shared = std::make_shared<DenseBlock>(std::move(M));
  return LinearOperator{n, [shared](const DenseBlock& X) -> DenseBlock { return (*shared) * X; }};
}

inline LinearOperator identity_operator(Index n) {
  return LinearOperator{n, [](const DenseBlock& X) { return X; }};
}

}  // namespace nschur
