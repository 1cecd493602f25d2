#pragma once

/// \file
/// Preconditioned conjugate gradients, single and block.
///
/// Both solvers measure ||b - A x|| / ||b|| per right-hand side. The residual
/// is carried by the recurrence and replaced by the true residual every
/// `true_residual_interval` iterations; a recurrence residual that claims
/// convergence is confirmed against the true residual before stopping.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nschur/linear_operator.hpp"

namespace nschur {

struct SolverConfig {
  double tol = 1e-6;
  Index maxit = 1000;
  Index true_residual_interval = 50;
  double breakdown_rel_tol = 1e-12;  // block PCG deflation, relative to the initial direction block
};

struct SolveReport {
  Index iterations = 0;
  std::vector<double> relative_residual_history;  // length iterations + 1
  bool converged = false;
  Index rhs_count = 1;
  std::map<std::string, double> config_echo;
  std::vector<Index> block_sizes;  // block PCG: search-direction count per iteration
};

template <class T>
struct SolveResult {
  T x;
  SolveReport report;
};

/// Called with (iteration, current iterate) after each update.
using IterateCallback = std::function<void(Index, const Vector&)>;

namespace detail {

inline std::map<std::string, double> echo(const SolverConfig& c) {
  return {{"tol", c.tol},
          {"maxit", static_cast<double>(c.maxit)},
          {"true_residual_interval", static_cast<double>(c.true_residual_interval)},
          {"breakdown_rel_tol", c.breakdown_rel_tol}};
}

}  // namespace detail

inline SolveResult<Vector> pcg(const LinearOperator& A, const LinearOperator& M, const Vector& b,
                               const SolverConfig& cfg = {}, const Vector* x0 = nullptr,
                               const IterateCallback& on_iterate = {}) {
  if (!(cfg.tol > 0.0)) throw InvalidArgument("pcg: tol must be positive");
  check_rows("pcg rhs", A.dim, b.size());
  if (M.dim != A.dim) throw DimensionMismatch("pcg preconditioner", A.dim, M.dim);

  SolveResult<Vector> out;
  SolveReport& rep = out.report;
  rep.config_echo = detail::echo(cfg);
  Vector& x = out.x;
  x = x0 ? *x0 : Vector::Zero(A.dim);
  check_rows("pcg x0", A.dim, x.size());

  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    rep.relative_residual_history = {0.0};
    rep.converged = true;
    return out;
  }
  Vector r = x0 ? Vector(b - A.apply(x)) : b;
  double res = r.norm() / bnorm;
  rep.relative_residual_history.push_back(res);
  if (res <= cfg.tol) {
    rep.converged = true;
    return out;
  }
  Vector z = M.apply(r);
  Vector p = z;
  double rz = r.dot(z);

  for (Index it = 1; it <= cfg.maxit; ++it) {
    const Vector q = A.apply(p);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) throw IndefiniteOperator("pcg: p^T A p <= 0 at iteration " + std::to_string(it));
    const double alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    if (cfg.true_residual_interval > 0 && it % cfg.true_residual_interval == 0) r = b - A.apply(x);
    res = r.norm() / bnorm;
    if (res <= cfg.tol) {
      const Vector true_r = b - A.apply(x);
      const double true_res = true_r.norm() / bnorm;
      if (true_res > cfg.tol) r = true_r;
      res = true_res;
    }
    rep.relative_residual_history.push_back(res);
    rep.iterations = it;
    if (on_iterate) on_iterate(it, x);
    if (res <= cfg.tol) {
      rep.converged = true;
      break;
    }
    z = M.apply(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return out;
}

/// Breakdown-free block PCG: the direction block is re-orthonormalized with
/// column pivoting every iteration and near-dependent directions are dropped.
inline SolveResult<DenseBlock> block_pcg(const LinearOperator& A, const LinearOperator& M, const DenseBlock& B,
                                         const SolverConfig& cfg = {}) {
  if (!(cfg.tol > 0.0)) throw InvalidArgument("block_pcg: tol must be positive");
  if (B.cols() < 1) throw InvalidArgument("block_pcg: need at least one right-hand side");
  check_rows("block_pcg rhs", A.dim, B.rows());
  if (M.dim != A.dim) throw DimensionMismatch("block_pcg preconditioner", A.dim, M.dim);

  const Index s = B.cols();
  SolveResult<DenseBlock> out;
  SolveReport& rep = out.report;
  rep.rhs_count = s;
  rep.config_echo = detail::echo(cfg);
  DenseBlock& X = out.x;
  X = DenseBlock::Zero(A.dim, s);

  Vector bnorm = B.colwise().norm().transpose();
  auto max_rel = [&](const DenseBlock& R) {
    double worst = 0.0;
    for (Index j = 0; j < s; ++j)
      if (bnorm(j) > 0.0) worst = std::max(worst, R.col(j).norm() / bnorm(j));
    return worst;
  };

  DenseBlock R = B;
  double res = max_rel(R);
  rep.relative_residual_history.push_back(res);
  if (res <= cfg.tol) {
    rep.converged = true;
    return out;
  }
  DenseBlock Z = M.apply(R);
  const double thresh = cfg.breakdown_rel_tol * Z.norm();
  DenseBlock P = orthonormalize_deflating(Z, thresh);
  rep.block_sizes.push_back(P.cols());

  for (Index it = 1; it <= cfg.maxit; ++it) {
    const DenseBlock Q = A.apply(P);
    DenseBlock PtQ = P.transpose() * Q;
    PtQ = 0.5 * (PtQ + PtQ.transpose()).eval();
    Eigen::LLT<DenseBlock> llt(PtQ);
    if (llt.info() != Eigen::Success)
      throw IndefiniteOperator("block_pcg: P^T A P not positive definite at iteration " + std::to_string(it));
    const DenseBlock alpha = llt.solve(P.transpose() * R);
    X += P * alpha;
    R -= Q * alpha;
    if (cfg.true_residual_interval > 0 && it % cfg.true_residual_interval == 0) R = B - A.apply(X);
    res = max_rel(R);
    if (res <= cfg.tol) {
      const DenseBlock true_R = B - A.apply(X);
      const double true_res = max_rel(true_R);
      if (true_res > cfg.tol) R = true_R;
      res = true_res;
    }
    rep.relative_residual_history.push_back(res);
    rep.iterations = it;
    if (res <= cfg.tol) {
      rep.converged = true;
      break;
    }
    Z = M.apply(R);
    const DenseBlock beta = -llt.solve(Q.transpose() * Z);
    P = orthonormalize_deflating(Z + P * beta, thresh);
    rep.block_sizes.push_back(P.cols());
    if (P.cols() == 0) throw Stagnation("block_pcg: all search directions deflated before convergence");
  }
  return out;
}

}  // namespace nschur
