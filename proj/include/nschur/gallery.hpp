#pragma once

// Model problems used by the tests, the acceptance suite and the CLI's
// `gallery:` matrix sources.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nschur/sparse_matrix.hpp"

namespace nschur::gallery {

/// tridiag(-1, 2, -1) of order n.
inline SparseMatrix laplacian_1d(Index n) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

/// Five-point Laplacian on an nx-by-ny grid with Dirichlet boundary, row-major numbering.
inline SparseMatrix laplacian_2d(Index nx, Index ny) {
  const Index n = nx * ny;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(5 * n));
  for (Index y = 0; y < ny; ++y) {
    for (Index x = 0; x < nx; ++x) {
      const Index i = y * nx + x;
      t.push_back({i, i, 4.0});
      if (x > 0) t.push_back({i, i - 1, -1.0});
      if (x + 1 < nx) t.push_back({i, i + 1, -1.0});
      if (y > 0) t.push_back({i, i - nx, -1.0});
      if (y + 1 < ny) t.push_back({i, i + nx, -1.0});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

inline SparseMatrix laplacian_2d(Index m) { return laplacian_2d(m, m); }

/// Seven-point Laplacian on an m^3 grid.
inline SparseMatrix laplacian_3d(Index m) {
  const Index n = m * m * m;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(7 * n));
  for (Index z = 0; z < m; ++z)
    for (Index y = 0; y < m; ++y)
      for (Index x = 0; x < m; ++x) {
        const Index i = (z * m + y) * m + x;
        t.push_back({i, i, 6.0});
        if (x > 0) t.push_back({i, i - 1, -1.0});
        if (x + 1 < m) t.push_back({i, i + 1, -1.0});
        if (y > 0) t.push_back({i, i - m, -1.0});
        if (y + 1 < m) t.push_back({i, i + m, -1.0});
        if (z > 0) t.push_back({i, i - m * m, -1.0});
        if (z + 1 < m) t.push_back({i, i + m * m, -1.0});
      }
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

/// Two-dimensional diffusion with piecewise-constant coefficients drawn from
/// {1, contrast} per cell (seeded), assembled with harmonic face averages.
/// Produces SPD systems with a cluster of small Schur eigenvalues.
inline SparseMatrix heterogeneous_2d(Index m, double contrast, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> kappa(static_cast<std::size_t>(m * m));
  for (auto& k : kappa) k = (gen() >> 63) ? contrast : 1.0;
  auto face = [&](Index a, Index b) { return 2.0 * kappa[a] * kappa[b] / (kappa[a] + kappa[b]); };
  const Index n = m * m;
  std::vector<Triplet> t;
  for (Index y = 0; y < m; ++y)
    for (Index x = 0; x < m; ++x) {
      const Index i = y * m + x;
      double diag = 0.0;
      auto couple = [&](Index j) {
        const double w = face(i, j);
        t.push_back({i, j, -w});
        diag += w;
      };
      if (x > 0) couple(i - 1);
      if (x + 1 < m) couple(i + 1);
      if (y > 0) couple(i - m);
      if (y + 1 < m) couple(i + m);
      // Dirichlet faces contribute the cell's own coefficient.
      const Index boundary_faces = (x == 0) + (x + 1 == m) + (y == 0) + (y + 1 == m);
      diag += static_cast<double>(boundary_faces) * kappa[i];
      t.push_back({i, i, diag});
    }
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

/// Arrow matrix: diagonal `d` for rows 0..n-2, dense last row/column `a`, corner `corner`.
inline SparseMatrix arrow(const std::vector<double>& d, const std::vector<double>& a, double corner) {
  const auto n = static_cast<Index>(d.size()) + 1;
  std::vector<Triplet> t;
  for (Index i = 0; i + 1 < n; ++i) {
    t.push_back({i, i, d[i]});
    t.push_back({i, n - 1, a[i]});
    t.push_back({n - 1, i, a[i]});
  }
  t.push_back({n - 1, n - 1, corner});
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

/// Dense random SPD matrix Q diag(eigs) Q^T from a seeded Gaussian.
inline DenseBlock random_spd_dense(Index n, double cond, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  DenseBlock g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = nd(gen);
  Eigen::HouseholderQR<DenseBlock> qr(g);
  DenseBlock q = qr.householderQ();
  Vector eig(n);
  for (Index i = 0; i < n; ++i)
    eig(i) = n == 1 ? 1.0 : std::pow(cond, static_cast<double>(i) / static_cast<double>(n - 1));
  DenseBlock a = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

}  // namespace nschur::gallery
