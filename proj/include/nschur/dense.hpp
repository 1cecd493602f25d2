#pragma once

// Dense containers and small helpers shared by every module.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

#include "nschur/errors.hpp"

namespace nschur {

using Index = Eigen::Index;

/// Column-major dense block: multivectors (n x m) and small dense factors.
using DenseBlock = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Orthonormal basis for range(X) via Householder QR (thin Q, same column count).
inline DenseBlock orthonormalize(const DenseBlock& X) {
  if (X.cols() == 0) return DenseBlock(X.rows(), 0);
  Eigen::HouseholderQR<DenseBlock> qr(X);
  return qr.householderQ() * DenseBlock::Identity(X.rows(), X.cols());
}

/// Rank-revealing orthonormalization: columns whose pivoted-QR diagonal falls
/// below `abs_tol` are dropped.
inline DenseBlock orthonormalize_deflating(const DenseBlock& X, double abs_tol) {
  if (X.cols() == 0) return DenseBlock(X.rows(), 0);
  Eigen::ColPivHouseholderQR<DenseBlock> qr(X);
  const auto& r = qr.matrixR();
  Index rank = 0;
  const Index diag = std::min(X.rows(), X.cols());
  while (rank < diag && std::abs(r(rank, rank)) > abs_tol) ++rank;
  DenseBlock q = qr.householderQ() * DenseBlock::Identity(X.rows(), rank);
  return q;
}

inline bool all_finite(const DenseBlock& X) { return X.allFinite(); }

inline void check_rows(const char* what, Index expected, Index got) {
  if (expected != got) throw DimensionMismatch(what, expected, got);
}

}  // namespace nschur
