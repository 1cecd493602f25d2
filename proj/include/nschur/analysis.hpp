#pragma once

/// \file
/// Dense spectral oracles for small operators, effective condition numbers,
/// the expectation bound for Nystrom deflation and the angle-based bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "nschur/linear_operator.hpp"

namespace nschur {

inline constexpr Index kDenseCap = 2000;

/// Absolute tolerance used to recognise eigenvalues clustered at 1 in deflated spectra.
inline constexpr double kUnitClusterTol = 1e-6;

struct SpectrumReport {
  Vector eigenvalues;  // descending
  double asymmetry = 0.0;  // ||M - M^T||_F / ||M||_F before symmetrization

  double max() const { return eigenvalues.size() ? eigenvalues(0) : 0.0; }
  double min() const { return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0; }
  double kappa() const { return max() / min(); }
  /// Ratio of extreme eigenvalues ignoring those below drop_below and, when
  /// skip_unit_cluster is set, those within kUnitClusterTol of 1.
  double kappa_eff(double drop_below, bool skip_unit_cluster = false) const;
};

/// Applies op to the identity, column by column through its public apply.
inline DenseBlock materialize(const LinearOperator& op, Index cap = kDenseCap) {
  if (op.dim > cap)
    throw CapExceeded("dense oracle: dimension " + std::to_string(op.dim) + " exceeds cap " + std::to_string(cap));
  if (op.dim == 0) return DenseBlock(0, 0);
  const DenseBlock I = DenseBlock::Identity(op.dim, op.dim);
  return op.apply(I);
}

inline SpectrumReport spectrum_of_dense(DenseBlock M) {
  SpectrumReport rep;
  const double nrm = M.norm();
  rep.asymmetry = nrm > 0.0 ? (M - M.transpose()).norm() / nrm : 0.0;
  if (rep.asymmetry > 1e-8)
    throw NumericalFailure("dense oracle: operator is not symmetric (relative asymmetry " +
                           std::to_string(rep.asymmetry) + ")");
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<DenseBlock> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("dense oracle: eigendecomposition failed");
  rep.eigenvalues = es.eigenvalues().reverse();
  return rep;
}

inline SpectrumReport dense_eig_oracle(const LinearOperator& op, Index cap = kDenseCap) {
  return spectrum_of_dense(materialize(op, cap));
}

/// Spectrum of M S for SPD M and symmetric S, computed as that of L^T S L with M = L L^T.
inline SpectrumReport preconditioned_spectrum(const LinearOperator& M, const LinearOperator& S, Index cap = kDenseCap) {
  if (M.dim != S.dim) throw DimensionMismatch("preconditioned_spectrum", S.dim, M.dim);
  DenseBlock m = materialize(M, cap);
  const double nrm = m.norm();
  if (nrm > 0.0 && (m - m.transpose()).norm() / nrm > 1e-8)
    throw NumericalFailure("preconditioned_spectrum: preconditioner is not symmetric");
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::LLT<DenseBlock> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(-1);
  const DenseBlock L = llt.matrixL();
  return spectrum_of_dense(L.transpose() * S.apply(L));
}

inline double effective_condition_number(const SpectrumReport& spec, double drop_below, bool skip_unit_cluster = false) {
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < spec.eigenvalues.size(); ++i) {
    const double v = spec.eigenvalues(i);
    if (v < drop_below) continue;
    if (skip_unit_cluster && std::abs(v - 1.0) <= kUnitClusterTol) continue;
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  if (!(lo <= hi)) throw InvalidArgument("effective_condition_number: no eigenvalue left after dropping");
  return hi / lo;
}

inline double SpectrumReport::kappa_eff(double drop_below, bool skip_unit_cluster) const {
  return effective_condition_number(*this, drop_below, skip_unit_cluster);
}

inline Index count_near(const Vector& values, double target, double tol) {
  Index c = 0;
  for (Index i = 0; i < values.size(); ++i)
    if (std::abs(values(i) - target) <= tol) ++c;
  return c;
}

struct BoundInput {
  Vector lambda;  // ascending, eigenvalues of R^{-T} S_G R^{-1}
  Index k = 1;
  Index p = 2;
  Index q = 0;
};

struct BoundReport {
  double value = 0.0;       // bound on (E sqrt(kappa_eff))^2
  Index argmin_t = 0;       // 1-based
  double expected_c = 0.0;  // E(c)
  bool hypothesis_ok = true;  // lambda_k <= 1/2
};

/// E(c) = sqrt(k/(p-1)) + e sqrt((k+p)(n-k)) / p.
inline double expected_c(Index k, Index p, Index n) {
  if (p < 2) throw InvalidArgument("expected_c: oversampling p must be at least 2");
  const double kd = static_cast<double>(k), pd = static_cast<double>(p), nd = static_cast<double>(n);
  return std::sqrt(kd / (pd - 1.0)) + std::numbers::e * std::sqrt((kd + pd) * (nd - kd)) / pd;
}

inline BoundReport nystrom_bound(const BoundInput& in) {
  const Vector& l = in.lambda;
  const Index n = l.size();
  if (in.p < 2) throw InvalidArgument("nystrom_bound: oversampling p must be at least 2");
  if (in.k < 1 || in.k + 1 > n) throw InvalidArgument("nystrom_bound: need 1 <= k < n");
  if (in.q < 0) throw InvalidArgument("nystrom_bound: q must be nonnegative");
  for (Index i = 0; i < n; ++i) {
    if (!(l(i) > 0.0)) throw InvalidArgument("nystrom_bound: spectrum must be positive");
    if (i > 0 && l(i) < l(i - 1)) throw InvalidArgument("nystrom_bound: spectrum must be ascending");
  }
  BoundReport out;
  out.expected_c = expected_c(in.k, in.p, n);
  out.hypothesis_ok = l(in.k - 1) <= 0.5;
  // 1-based indices in the formulas: lambda_j = l(j-1).
  const double top = 1.0 / l(in.k) - 1.0;
  const double lam_n = l(n - 1);
  out.value = std::numeric_limits<double>::infinity();
  for (Index t = 1; t <= in.k; ++t) {
    const double denom = 1.0 / l(t - 1) - 1.0;
    const double gamma = denom > 0.0 ? top / denom : 1.0;
    const double term = out.expected_c * std::sqrt(2.0 * static_cast<double>(t)) *
                        std::pow(gamma, static_cast<double>(in.q) + 0.5);
    const double root = std::sqrt(2.0) * std::max(term, 1.0) * std::sqrt(lam_n / l(t));
    const double v = root * root;
    if (v < out.value) {
      out.value = v;
      out.argmin_t = t;
    }
  }
  return out;
}

/// (sqrt(kappa_A) sin_theta + sqrt(kappa_eff_ideal))^2.
inline double kahl_angle_bound(double kappa_A, double kappa_eff_ideal, double sin_theta) {
  if (kappa_A < 0.0 || kappa_eff_ideal < 0.0 || sin_theta < 0.0 || sin_theta > 1.0)
    throw InvalidArgument("kahl_angle_bound: inputs out of range");
  const double r = std::sqrt(kappa_A) * sin_theta + std::sqrt(kappa_eff_ideal);
  return r * r;
}

/// Dense A-DEF deflated operator P_DEF A = A - A U (U^T A U)^{-1} U^T A for symmetric A.
inline DenseBlock deflated_operator(const DenseBlock& A, const DenseBlock& U) {
  if (U.cols() == 0) return A;
  const DenseBlock AU = A * U;
  const DenseBlock E = U.transpose() * AU;
  Eigen::LLT<DenseBlock> llt(0.5 * (E + E.transpose()));
  if (llt.info() != Eigen::Success) throw NumericalFailure("deflated_operator: coarse matrix is not SPD");
  return A - AU * llt.solve(AU.transpose());
}

}  // namespace nschur
