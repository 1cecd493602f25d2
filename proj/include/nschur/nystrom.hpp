#pragma once

/// \file
/// Randomized Nystrom approximation B ~ U diag(Sigma) U^T of a symmetric
/// positive semidefinite operator, with oversampling and power iteration.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "nschur/linear_operator.hpp"
#include "nschur/random.hpp"

namespace nschur {

struct SketchConfig {
  Index k = 20;
  Index p = 0;
  Index q = 0;
  double epsilon = -1.0;  // negative: 1e-12 times the largest eigenvalue of the core matrix
  std::uint64_t seed = 0;
};

struct LowRankApprox {
  DenseBlock U;   // n x rank, orthonormal columns
  Vector Sigma;   // rank, descending, >= 0
  Index core_rank = 0;  // eigenvalues of the core matrix kept by the threshold
  bool rank_collapsed = false;

  Index rank() const noexcept { return U.cols(); }
};

inline void check_sketch_config(const SketchConfig& cfg, Index n) {
  if (cfg.k < 1) throw InvalidArgument("sketch: k must be at least 1");
  if (cfg.p < 0 || cfg.q < 0) throw InvalidArgument("sketch: p and q must be nonnegative");
  if (cfg.k + cfg.p > n)
    throw InvalidArgument("sketch: k + p = " + std::to_string(cfg.k + cfg.p) + " exceeds dimension " +
                          std::to_string(n));
}

/// Nystrom approximation of B given the block F = B G for an n x (k+p) block G.
/// Split out so callers that already hold B G (with G possibly orthonormalized)
/// can reuse it.
inline LowRankApprox nystrom_from_sketch(const DenseBlock& G, const DenseBlock& F, Index k, double epsilon) {
  if (!all_finite(F)) throw NumericalFailure("nystrom: non-finite entries in B*G");
  const Index n = F.rows(), m = F.cols();
  LowRankApprox out;

  Eigen::HouseholderQR<DenseBlock> qr(F);
  const DenseBlock Q = qr.householderQ() * DenseBlock::Identity(n, m);
  const DenseBlock R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();

  DenseBlock C = G.transpose() * F;
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<DenseBlock> ec(C);
  if (ec.info() != Eigen::Success) throw NumericalFailure("nystrom: eigendecomposition of the core matrix failed");
  const Vector& d = ec.eigenvalues();  // ascending
  const double dmax = d.size() ? d(d.size() - 1) : 0.0;
  const double eps = epsilon >= 0.0 ? epsilon : 1e-12 * std::max(dmax, 0.0);
  std::vector<Index> keep;
  for (Index i = 0; i < d.size(); ++i)
    if (d(i) >= eps && d(i) > 0.0) keep.push_back(i);
  out.core_rank = static_cast<Index>(keep.size());
  if (keep.empty()) {
    out.U.resize(n, 0);
    out.Sigma.resize(0);
    out.rank_collapsed = true;
    return out;
  }

  DenseBlock RV1(m, static_cast<Index>(keep.size()));
  Vector d1inv(static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    RV1.col(static_cast<Index>(j)) = R * ec.eigenvectors().col(keep[j]);
    d1inv(static_cast<Index>(j)) = 1.0 / d(keep[j]);
  }
  DenseBlock T = RV1 * d1inv.asDiagonal() * RV1.transpose();
  T = 0.5 * (T + T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<DenseBlock> et(T);
  if (et.info() != Eigen::Success) throw NumericalFailure("nystrom: eigendecomposition of T failed");

  const Index rank = std::min<Index>(out.core_rank, k);
  out.U.resize(n, rank);
  out.Sigma.resize(rank);
  for (Index j = 0; j < rank; ++j) {
    const Index src = m - 1 - j;  // descending
    out.U.col(j) = Q * et.eigenvectors().col(src);
    out.Sigma(j) = std::max(et.eigenvalues()(src), 0.0);
  }
  if (!all_finite(out.U) || !all_finite(out.Sigma)) throw NumericalFailure("nystrom: non-finite factors");
  return out;
}

inline LowRankApprox nystrom_approx(const LinearOperator& B, const SketchConfig& cfg) {
  check_sketch_config(cfg, B.dim);
  DenseBlock G = gaussian_sketch(B.dim, cfg.k + cfg.p, cfg.seed);
  for (Index i = 0; i < cfg.q; ++i) {
    const DenseBlock BG = B.apply(G);
    if (!all_finite(BG)) throw NumericalFailure("nystrom: non-finite entries in a power step");
    G = orthonormalize(BG);
  }
  const DenseBlock F = B.apply(G);
  return nystrom_from_sketch(G, F, cfg.k, cfg.epsilon);
}

inline DenseBlock reconstruct(const LowRankApprox& a) { return a.U * a.Sigma.asDiagonal() * a.U.transpose(); }

/// Sine of the largest principal angle between range(U) and range(V), as ||U U^T - V V^T||_2.
inline double subspace_angle(const DenseBlock& U, const DenseBlock& V) {
  if (U.rows() != V.rows()) throw DimensionMismatch("subspace_angle rows", U.rows(), V.rows());
  for (const DenseBlock* X : {&U, &V}) {
    const double dev = (X->transpose() * *X - DenseBlock::Identity(X->cols(), X->cols())).norm();
    if (dev > 1e-8) throw InvalidArgument("subspace_angle: input columns are not orthonormal");
  }
  const DenseBlock D = U * U.transpose() - V * V.transpose();
  if (D.size() == 0) return 0.0;
  Eigen::BDCSVD<DenseBlock> svd(D);
  return std::min(1.0, svd.singularValues()(0));
}

}  // namespace nschur
