#pragma once

/// \file
/// Thick-restart (block) Lanczos for a few extreme eigenpairs of a symmetric
/// operator.
///
/// The basis is kept fully orthogonal (classical Gram-Schmidt, twice) and the
/// projected matrix is formed explicitly as V^T A V, so the kept Ritz vectors
/// need no special arrow-shaped bookkeeping after a restart; residual norms
/// are computed from A V directly. With block_size 1 this is the classic
/// single-vector method; a block size b resolves eigenvalues of multiplicity
/// up to b.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "nschur/linear_operator.hpp"
#include "nschur/random.hpp"

namespace nschur {

enum class Which { largest, smallest };

struct LanczosConfig {
  Index k = 10;
  Index restart_dim = 0;  // 0 selects 2k
  double tol = 1e-10;     // residual bound relative to the largest |Ritz value| seen
  Which which = Which::largest;
  Index block_size = 1;
  Index max_restarts = 1000;
  std::uint64_t seed = 0;
};

struct EigenReport {
  std::vector<double> values;  // descending
  DenseBlock vectors;
  std::vector<double> residual_norms;
  Index lanczos_iterations = 0;  // operator applications (columns)
  Index restarts = 0;
  bool converged = false;
};

namespace detail {

/// Orthonormal block orthogonal to V(:, 0:cols); rank-deficient directions dropped.
inline DenseBlock orthogonal_extension(const DenseBlock& V, Index cols, DenseBlock W) {
  for (int pass = 0; pass < 2; ++pass) W -= V.leftCols(cols) * (V.leftCols(cols).transpose() * W);
  const double scale = std::max(W.norm(), 1e-300);
  DenseBlock Q = orthonormalize_deflating(W, 1e-10 * scale);
  if (Q.cols() > 0) {
    Q -= V.leftCols(cols) * (V.leftCols(cols).transpose() * Q);
    Q = orthonormalize(Q);
  }
  return Q;
}

}  // namespace detail

inline EigenReport lanczos_thick_restart(const LinearOperator& A, const LanczosConfig& cfg) {
  const Index n = A.dim;
  const Index k = cfg.k;
  const Index b = std::max<Index>(1, cfg.block_size);
  if (k < 1 || k > n) throw InvalidArgument("lanczos: need 1 <= k <= n");
  Index m = cfg.restart_dim > 0 ? cfg.restart_dim : 2 * k;
  if (m < k + 2 && m < n) throw InvalidArgument("lanczos: restart_dim must be at least k + 2");
  m = std::min(m, n);

  SketchRng rng(cfg.seed);
  auto random_block = [&](Index cols) {
    DenseBlock G(n, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < n; ++i) G(i, j) = rng.normal();
    return G;
  };

  DenseBlock V(n, m + b);
  DenseBlock AV(n, m + b);
  Index cols = 0;
  DenseBlock pending = detail::orthogonal_extension(V, 0, random_block(std::min(b, n)));
  EigenReport rep;
  double anorm = 0.0;

  for (Index restart = 0;; ++restart) {
    while (cols < m && pending.cols() > 0) {
      const Index add = std::min(pending.cols(), n - cols);
      const DenseBlock N = pending.leftCols(add);
      const DenseBlock AN = A.apply(N);
      rep.lanczos_iterations += add;
      V.middleCols(cols, add) = N;
      AV.middleCols(cols, add) = AN;
      cols += add;
      if (cols >= n) {
        pending.resize(n, 0);
        break;
      }
      pending = detail::orthogonal_extension(V, cols, AN);
      if (pending.cols() < std::min(add, n - cols)) {
        // Invariant subspace (or lost rank): refill with random directions.
        const Index need = std::min(add, n - cols) - pending.cols();
        DenseBlock Vp(n, cols + pending.cols());
        Vp << V.leftCols(cols), pending;
        DenseBlock extra = detail::orthogonal_extension(Vp, Vp.cols(), random_block(need));
        DenseBlock merged(n, pending.cols() + extra.cols());
        merged << pending, extra;
        pending = merged;
      }
    }

    DenseBlock T = V.leftCols(cols).transpose() * AV.leftCols(cols);
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<DenseBlock> es(T);
    const Vector& theta = es.eigenvalues();
    // Ritz indices with the wanted end first.
    std::vector<Index> order(static_cast<std::size_t>(cols));
    std::iota(order.begin(), order.end(), Index{0});
    if (cfg.which == Which::largest) std::reverse(order.begin(), order.end());
    anorm = std::max({anorm, std::abs(theta(0)), std::abs(theta(cols - 1))});

    const Index want = std::min(k, cols);
    DenseBlock Y(cols, want);
    for (Index i = 0; i < want; ++i) Y.col(i) = es.eigenvectors().col(order[i]);
    const DenseBlock X = V.leftCols(cols) * Y;
    const DenseBlock AX = AV.leftCols(cols) * Y;
    std::vector<double> res(static_cast<std::size_t>(want));
    bool all_ok = want == k;
    for (Index i = 0; i < want; ++i) {
      res[i] = (AX.col(i) - theta(order[i]) * X.col(i)).norm();
      if (res[i] > cfg.tol * std::max(anorm, 1e-300)) all_ok = false;
    }

    if (all_ok || pending.cols() == 0 || restart >= cfg.max_restarts) {
      rep.converged = all_ok;
      rep.restarts = restart;
      std::vector<Index> idx(static_cast<std::size_t>(want));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::sort(idx.begin(), idx.end(), [&](Index a, Index c) { return theta(order[a]) > theta(order[c]); });
      rep.vectors.resize(n, want);
      for (Index i = 0; i < want; ++i) {
        rep.values.push_back(theta(order[idx[i]]));
        rep.residual_norms.push_back(res[idx[i]]);
        rep.vectors.col(i) = X.col(idx[i]);
      }
      return rep;
    }

    // Thick restart: keep l Ritz vectors; the pending block stays orthogonal to them.
    const Index l = std::min(cols - 1, k + (m - k) / 2);
    DenseBlock Yl(cols, l);
    for (Index i = 0; i < l; ++i) Yl.col(i) = es.eigenvectors().col(order[i]);
    const DenseBlock newV = V.leftCols(cols) * Yl;
    const DenseBlock newAV = AV.leftCols(cols) * Yl;
    V.leftCols(l) = newV;
    AV.leftCols(l) = newAV;
    cols = l;
  }
}

}  // namespace nschur
