#pragma once

/// \file
/// Implicit Schur-complement operators of a DBBD system.
///
///   S_G = A_G - A_GI A_I^{-1} A_IG     (interface Schur complement)
///   S_I = A_I - A_IG A_G^{-1} A_GI     (interior Schur complement)
///   H   = R^{-T} A_GI A_I^{-1} A_IG R^{-1},  A_G = R^T R
///
/// None of them is ever formed; A_I^{-1} goes through the block factors and
/// A_G^{-1} through a GammaSolver.

#include <memory>
#include <string>
#include <utility>

#include "nschur/cholesky.hpp"
#include "nschur/krylov.hpp"
#include "nschur/linear_operator.hpp"
#include "nschur/partition.hpp"

namespace nschur {

enum class GammaSolveMode { direct, iterative };

struct GammaSolverOptions {
  GammaSolveMode mode = GammaSolveMode::direct;
  double iterative_tol = 1e-10;
  Index iterative_maxit = 5000;
  CholeskyOptions cholesky;
};

/// Applies A_G^{-1}. A restricted view refuses to hand out the Cholesky
/// factor, which is how builders that must not use R_G are held to it.
class GammaSolver {
 public:
  GammaSolver() = default;

  GammaSolver(const SparseMatrix& A_gamma, const GammaSolverOptions& opt) {
    auto st = std::make_shared<State>();
    st->opt = opt;
    st->A = A_gamma;
    if (opt.mode == GammaSolveMode::direct) {
      st->factor = CholeskyFactor::factor(A_gamma, opt.cholesky);
      st->has_factor = true;
    } else {
      const Vector d = A_gamma.diagonal();
      for (Index i = 0; i < d.size(); ++i)
        if (!(d(i) > 0.0)) throw NotPositiveDefinite(i);
      st->inv_diag = d.cwiseInverse();
    }
    state_ = std::move(st);
  }

  Index n() const { return state_ ? state_->A.rows() : 0; }
  GammaSolveMode mode() const { return state_->opt.mode; }
  bool restricted() const noexcept { return restricted_; }

  GammaSolver restricted_view() const {
    GammaSolver g = *this;
    g.restricted_ = true;
    return g;
  }

  DenseBlock solve(const DenseBlock& B) const {
    check_rows("GammaSolver::solve", n(), B.rows());
    if (B.cols() == 0 || n() == 0) return DenseBlock::Zero(B.rows(), B.cols());
    if (state_->has_factor) return state_->factor.solve(B);
    SolverConfig cfg;
    cfg.tol = state_->opt.iterative_tol;
    cfg.maxit = state_->opt.iterative_maxit;
    const auto& A = state_->A;
    const Vector& dinv = state_->inv_diag;
    const LinearOperator op{n(), [&A](const DenseBlock& X) { return spmm(A, X); }};
    const LinearOperator jacobi{n(), [&dinv](const DenseBlock& X) -> DenseBlock { return dinv.asDiagonal() * X; }};
    auto res = block_pcg(op, jacobi, B, cfg);
    if (!res.report.converged) throw Stagnation("iterative A_Gamma solve did not reach its tolerance");
    return res.x;
  }

  /// The Cholesky factor R_G. Throws ContractViolation on a restricted view.
  const CholeskyFactor& factor() const {
    if (restricted_) throw ContractViolation("this preconditioner variant must not access the Cholesky factor of A_Gamma");
    if (!state_ || !state_->has_factor) throw ContractViolation("A_Gamma was not factorized (iterative gamma solver)");
    return state_->factor;
  }

 private:
  struct State {
    GammaSolverOptions opt;
    SparseMatrix A;
    CholeskyFactor factor;
    bool has_factor = false;
    Vector inv_diag;
  };
  std::shared_ptr<const State> state_;
  bool restricted_ = false;
};

/// Everything needed to apply the Schur operators: the DBBD blocks, A_I factors, A_G solver.
struct SchurContext {
  std::shared_ptr<const DBBDSystem> sys;
  std::shared_ptr<const BlockDiagFactor> interior;
  GammaSolver gamma;

  Index n_gamma() const { return sys->n_gamma; }
  Index n_I() const { return sys->n_I; }

  SchurContext restricted() const { return SchurContext{sys, interior, gamma.restricted_view()}; }
};

inline SchurContext make_schur_context(DBBDSystem sys, const GammaSolverOptions& gopt = {},
                                       const CholeskyOptions& interior_opt = {}) {
  SchurContext ctx;
  auto shared = std::make_shared<const DBBDSystem>(std::move(sys));
  ctx.interior = std::make_shared<const BlockDiagFactor>(block_diag_factor(*shared, interior_opt));
  ctx.gamma = GammaSolver(shared->A_gamma, gopt);
  ctx.sys = std::move(shared);
  return ctx;
}

/// S_G X.
inline DenseBlock schur_apply(const SchurContext& ctx, const DenseBlock& X) {
  const DBBDSystem& s = *ctx.sys;
  check_rows("schur_apply", s.n_gamma, X.rows());
  DenseBlock Y = spmm(s.A_gamma, X);
  if (s.n_I > 0) Y -= spmm(s.A_gamma_I, ctx.interior->solve(spmm(s.A_I_gamma, X)));
  return Y;
}

/// S_I X.
inline DenseBlock inner_schur_apply(const SchurContext& ctx, const DenseBlock& X) {
  const DBBDSystem& s = *ctx.sys;
  check_rows("inner_schur_apply", s.n_I, X.rows());
  DenseBlock Y = spmm(s.interior, X);
  if (s.n_gamma > 0) Y -= spmm(s.A_I_gamma, ctx.gamma.solve(spmm(s.A_gamma_I, X)));
  return Y;
}

/// H U = R^{-T} A_GI A_I^{-1} A_IG R^{-1} U; needs the Cholesky factor of A_G.
inline DenseBlock h_apply(const SchurContext& ctx, const DenseBlock& U) {
  const DBBDSystem& s = *ctx.sys;
  check_rows("h_apply", s.n_gamma, U.rows());
  const CholeskyFactor& R = ctx.gamma.factor();
  const DenseBlock Z = R.solve(U, SolveMode::backward_only);
  DenseBlock W = DenseBlock::Zero(s.n_gamma, U.cols());
  if (s.n_I > 0) W = spmm(s.A_gamma_I, ctx.interior->solve(spmm(s.A_I_gamma, Z)));
  return R.solve(W, SolveMode::forward_only);
}

class SchurOperator {
 public:
  explicit SchurOperator(SchurContext ctx) : ctx_(std::move(ctx)) {}
  DenseBlock apply(const DenseBlock& X) const { return schur_apply(ctx_, X); }
  LinearOperator as_operator() const {
    return LinearOperator{ctx_.n_gamma(), [ctx = ctx_](const DenseBlock& X) { return schur_apply(ctx, X); }};
  }

 private:
  SchurContext ctx_;
};

class InnerSchurOperator {
 public:
  explicit InnerSchurOperator(SchurContext ctx) : ctx_(std::move(ctx)) {}
  DenseBlock apply(const DenseBlock& X) const { return inner_schur_apply(ctx_, X); }
  LinearOperator as_operator() const {
    return LinearOperator{ctx_.n_I(), [ctx = ctx_](const DenseBlock& X) { return inner_schur_apply(ctx, X); }};
  }

 private:
  SchurContext ctx_;
};

class HOperator {
 public:
  explicit HOperator(SchurContext ctx) : ctx_(std::move(ctx)) { ctx_.gamma.factor(); }
  DenseBlock apply(const DenseBlock& U) const { return h_apply(ctx_, U); }
  LinearOperator as_operator() const {
    return LinearOperator{ctx_.n_gamma(), [ctx = ctx_](const DenseBlock& U) { return h_apply(ctx, U); }};
  }

 private:
  SchurContext ctx_;
};

/// A_I^{-1} as an operator (the preconditioner of the inner S_I solves).
inline LinearOperator interior_inverse_operator(const SchurContext& ctx) {
  return LinearOperator{ctx.n_I(), [f = ctx.interior](const DenseBlock& X) { return f->solve(X); }};
}

inline LinearOperator gamma_inverse_operator(const SchurContext& ctx) {
  return LinearOperator{ctx.n_gamma(), [g = ctx.gamma](const DenseBlock& X) { return g.solve(X); }};
}

}  // namespace nschur
