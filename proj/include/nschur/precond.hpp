#pragma once

/// \file
/// Preconditioners for the interface Schur complement S_G.
///
/// Every variant applies as  scale * A_G^{-1} r + Z diag(D) Z^T r,  except the
/// A-DEF forms, which use the symmetric balanced projection
///   (I - Q S_G) A_G^{-1} (I - S_G Q) + Q,   Q = Z (Z^T S_G Z)^{-1} Z^T.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nschur/analysis.hpp"
#include "nschur/krylov.hpp"
#include "nschur/lanczos.hpp"
#include "nschur/nystrom.hpp"
#include "nschur/schur.hpp"

namespace nschur {

enum class Variant { S1, S2, LiTheta, M1, M2, M3, ADEF1, ADEF2, ADEF3 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::S1: return "s1";
    case Variant::S2: return "s2";
    case Variant::LiTheta: return "li";
    case Variant::M1: return "m1";
    case Variant::M2: return "m2";
    case Variant::M3: return "m3";
    case Variant::ADEF1: return "adef1";
    case Variant::ADEF2: return "adef2";
    case Variant::ADEF3: return "adef3";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::S1, Variant::S2, Variant::LiTheta, Variant::M1, Variant::M2, Variant::M3, Variant::ADEF1,
                    Variant::ADEF2, Variant::ADEF3})
    if (s == variant_name(v)) return v;
  throw InvalidArgument("unknown preconditioner variant '" + s + "'");
}

inline bool is_nystrom_variant(Variant v) {
  return v == Variant::M1 || v == Variant::M2 || v == Variant::M3 || v == Variant::ADEF1 || v == Variant::ADEF2 ||
         v == Variant::ADEF3;
}

inline bool is_adef(Variant v) { return v == Variant::ADEF1 || v == Variant::ADEF2 || v == Variant::ADEF3; }

/// M2, M3 and their A-DEF twins must not use the Cholesky factor of A_G.
inline bool avoids_gamma_factor(Variant v) {
  return v == Variant::M2 || v == Variant::M3 || v == Variant::ADEF2 || v == Variant::ADEF3;
}

struct BuildInfo {
  Index requested_rank = 0;
  Index rank = 0;
  bool rank_collapsed = false;
  Index it_SI = 0;           // inner S_I block-PCG iterations, summed over all solves
  Index eig_iterations = 0;  // Lanczos operator applications (S2/Li with Lanczos)
  bool eig_converged = true;
};

class TwoLevelPrecond {
 public:
  TwoLevelPrecond() = default;

  Variant variant() const noexcept { return variant_; }
  Index n() const noexcept { return gamma_.n(); }
  Index rank() const noexcept { return Z_.cols(); }
  const DenseBlock& Z() const noexcept { return Z_; }
  const Vector& D() const noexcept { return D_; }
  double scale() const noexcept { return scale_; }
  const DenseBlock& E_inv() const noexcept { return Einv_; }
  const BuildInfo& info() const noexcept { return info_; }

  DenseBlock apply(const DenseBlock& R) const {
    check_rows("TwoLevelPrecond::apply", n(), R.rows());
    if (!adef_) {
      DenseBlock Y = gamma_.solve(R);
      if (scale_ != 1.0) Y *= scale_;
      if (Z_.cols() > 0) Y.noalias() += Z_ * (D_.asDiagonal() * (Z_.transpose() * R));
      return Y;
    }
    if (Z_.cols() == 0) return gamma_.solve(R);
    const DenseBlock ZtR = Z_.transpose() * R;
    DenseBlock T = R - SZ_ * (Einv_ * ZtR);
    DenseBlock Y = gamma_.solve(T);
    Y -= Z_ * (Einv_ * (SZ_.transpose() * Y));
    Y += Z_ * (Einv_ * ZtR);
    return Y;
  }

  Vector apply(const Vector& r) const {
    DenseBlock R = r;
    return apply(R).col(0);
  }

  LinearOperator as_operator() const {
    return LinearOperator{n(), [self = *this](const DenseBlock& R) { return self.apply(R); }};
  }

  /// Additive form: scale A_G^{-1} + Z diag(D) Z^T.
  static TwoLevelPrecond additive(Variant v, GammaSolver gamma, DenseBlock Z, Vector D, double scale, BuildInfo info) {
    if (Z.rows() != gamma.n() && Z.cols() > 0) throw DimensionMismatch("TwoLevelPrecond Z rows", gamma.n(), Z.rows());
    if (D.size() != Z.cols()) throw DimensionMismatch("TwoLevelPrecond D length", Z.cols(), D.size());
    TwoLevelPrecond p;
    p.variant_ = v;
    p.gamma_ = std::move(gamma);
    p.Z_ = Z.cols() > 0 ? std::move(Z) : DenseBlock(p.gamma_.n(), 0);
    p.D_ = std::move(D);
    p.scale_ = scale;
    p.info_ = info;
    p.info_.rank = p.Z_.cols();
    return p;
  }

  /// A-DEF form built from deflation vectors Z; only range(Z) matters.
  static TwoLevelPrecond adapted_deflation(Variant v, const SchurContext& ctx, const DenseBlock& Z, BuildInfo info) {
    TwoLevelPrecond p;
    p.variant_ = v;
    p.adef_ = true;
    p.gamma_ = ctx.gamma;
    p.info_ = info;
    const Index n = ctx.n_gamma();
    p.Z_ = Z.cols() > 0 ? orthonormalize_deflating(Z, 1e-12 * Z.norm()) : DenseBlock(n, 0);
    if (p.Z_.cols() > 0) {
      p.SZ_ = schur_apply(ctx, p.Z_);
      DenseBlock E = p.Z_.transpose() * p.SZ_;
      E = 0.5 * (E + E.transpose()).eval();
      Eigen::LLT<DenseBlock> llt(E);
      if (llt.info() != Eigen::Success) throw NumericalFailure("A-DEF coarse matrix is not positive definite");
      p.Einv_ = llt.solve(DenseBlock::Identity(E.rows(), E.cols()));
      p.Einv_ = 0.5 * (p.Einv_ + p.Einv_.transpose()).eval();
    } else {
      p.SZ_ = DenseBlock(n, 0);
      p.Einv_ = DenseBlock(0, 0);
    }
    p.D_ = Vector(p.Z_.cols());
    p.D_.setZero();
    p.info_.rank = p.Z_.cols();
    return p;
  }

 private:
  Variant variant_ = Variant::S1;
  GammaSolver gamma_;
  DenseBlock Z_;
  Vector D_;
  double scale_ = 1.0;
  bool adef_ = false;
  DenseBlock SZ_;
  DenseBlock Einv_;
  BuildInfo info_;
};

inline TwoLevelPrecond build_one_level(const SchurContext& ctx) {
  return TwoLevelPrecond::additive(Variant::S1, ctx.gamma, DenseBlock(ctx.n_gamma(), 0), Vector(0), 1.0, {});
}

// ---------------------------------------------------------------------------
// Exact eigenpairs of H (ideal two-level and Li-theta)

struct EigSource {
  enum class Kind { dense, lanczos };
  Kind kind = Kind::dense;
  double tol = 1e-10;
  Index restart_dim = 0;
  Index block_size = 1;
  std::uint64_t seed = 0;
};

struct HEigenpairs {
  Vector sigma;  // descending
  DenseBlock U;  // orthonormal
  Index iterations = 0;
  bool converged = true;
};

/// The k largest eigenpairs of H, i.e. the k smallest of the one-level preconditioned Schur complement.
inline HEigenpairs h_top_eigenpairs(const SchurContext& ctx, Index k, const EigSource& src = {}) {
  const Index n = ctx.n_gamma();
  if (k < 0 || (k > 0 && k >= n)) throw InvalidArgument("need 0 <= k < n_Gamma eigenpairs of H");
  HEigenpairs out;
  out.sigma.resize(k);
  out.U.resize(n, k);
  if (k == 0) return out;
  const HOperator H(ctx);
  if (src.kind == EigSource::Kind::dense) {
    DenseBlock h = materialize(H.as_operator());
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<DenseBlock> es(h);
    if (es.info() != Eigen::Success) throw NumericalFailure("dense eigendecomposition of H failed");
    for (Index j = 0; j < k; ++j) {
      out.sigma(j) = es.eigenvalues()(n - 1 - j);
      out.U.col(j) = es.eigenvectors().col(n - 1 - j);
    }
    return out;
  }
  LanczosConfig lc;
  lc.k = k;
  lc.restart_dim = src.restart_dim;
  lc.tol = src.tol;
  lc.which = Which::largest;
  lc.block_size = src.block_size;
  lc.seed = src.seed;
  const EigenReport rep = lanczos_thick_restart(H.as_operator(), lc);
  out.iterations = rep.lanczos_iterations;
  out.converged = rep.converged;
  const Index got = std::min<Index>(k, static_cast<Index>(rep.values.size()));
  out.sigma.resize(got);
  out.U = rep.vectors.leftCols(got);
  for (Index j = 0; j < got; ++j) out.sigma(j) = rep.values[static_cast<std::size_t>(j)];
  return out;
}

namespace detail {

inline TwoLevelPrecond build_from_h_pairs(const SchurContext& ctx, Variant v, const HEigenpairs& e, double theta) {
  const Index k = e.U.cols();
  for (Index j = 0; j < k; ++j)
    if (!(e.sigma(j) < 1.0)) throw NumericalFailure("H has an eigenvalue >= 1; S_Gamma is not positive definite");
  const DenseBlock Z = ctx.gamma.factor().solve(e.U, SolveMode::backward_only);
  Vector D(k);
  const double base = 1.0 / (1.0 - theta);
  for (Index j = 0; j < k; ++j) D(j) = 1.0 / (1.0 - e.sigma(j)) - base;
  BuildInfo info;
  info.requested_rank = k;
  info.eig_iterations = e.iterations;
  info.eig_converged = e.converged;
  return TwoLevelPrecond::additive(v, ctx.gamma, Z, D, base, info);
}

}  // namespace detail

/// A_G^{-1} + Z (Lambda^{-1} - I) Z^T with Z = R^{-1} U from the top-k eigenpairs of H.
inline TwoLevelPrecond build_ideal_two_level(const SchurContext& ctx, Index k, const EigSource& src = {}) {
  if (k < 0 || (k > 0 && k >= ctx.n_gamma())) throw InvalidArgument("ideal two-level: need 0 <= k < n_Gamma");
  return detail::build_from_h_pairs(ctx, Variant::S2, h_top_eigenpairs(ctx, k, src), 0.0);
}

/// (1 - theta)^{-1} A_G^{-1} + Z ((I - Sigma)^{-1} - (1 - theta)^{-1} I) Z^T.
inline TwoLevelPrecond build_li_theta(const SchurContext& ctx, Index k, double theta, const EigSource& src = {}) {
  if (!(theta >= 0.0 && theta < 1.0)) throw InvalidArgument("Li-theta: theta must lie in [0, 1)");
  if (k < 0 || (k > 0 && k >= ctx.n_gamma())) throw InvalidArgument("Li-theta: need 0 <= k < n_Gamma");
  return detail::build_from_h_pairs(ctx, Variant::LiTheta, h_top_eigenpairs(ctx, k, src), theta);
}

// ---------------------------------------------------------------------------
// Nystrom-Schur family

struct InnerSolveConfig {
  double eps_SI = 0.1;
  Index maxit = 1000;
};

struct NystromBuild {
  TwoLevelPrecond precond;
  SolveReport inner;  // all inner S_I solves, iterations summed and histories concatenated
  LowRankApprox approx;
};

namespace detail {

/// S_I^{-1} X by block PCG preconditioned with A_I; every call is recorded into `acc`.
inline DenseBlock inner_solve(const SchurContext& ctx, const DenseBlock& X, const InnerSolveConfig& ic,
                              SolveReport& acc) {
  SolverConfig cfg;
  cfg.tol = ic.eps_SI;
  cfg.maxit = ic.maxit;
  const auto res = block_pcg(InnerSchurOperator(ctx).as_operator(), interior_inverse_operator(ctx), X, cfg);
  if (!res.report.converged)
    throw Stagnation("inner S_I block solve did not reach eps_SI = " + std::to_string(ic.eps_SI) + " in " +
                     std::to_string(ic.maxit) + " iterations");
  acc.iterations += res.report.iterations;
  acc.rhs_count = res.report.rhs_count;
  acc.config_echo = res.report.config_echo;
  acc.relative_residual_history.insert(acc.relative_residual_history.end(),
                                       res.report.relative_residual_history.begin(),
                                       res.report.relative_residual_history.end());
  acc.block_sizes.insert(acc.block_sizes.end(), res.report.block_sizes.begin(), res.report.block_sizes.end());
  return res.x;
}

}  // namespace detail

inline NystromBuild build_nystrom_schur(const SchurContext& full_ctx, Variant v, const SketchConfig& cfg,
                                        const InnerSolveConfig& ic = {}) {
  if (!is_nystrom_variant(v)) throw InvalidArgument(std::string("not a Nystrom-Schur variant: ") + variant_name(v));
  if (!(ic.eps_SI > 0.0)) throw InvalidArgument("eps_SI must be positive");
  const SchurContext ctx = avoids_gamma_factor(v) ? full_ctx.restricted() : full_ctx;
  const DBBDSystem& s = *ctx.sys;
  const bool on_interior = v == Variant::M3 || v == Variant::ADEF3;
  check_sketch_config(cfg, on_interior ? s.n_I : s.n_gamma);

  auto acc = std::make_shared<SolveReport>();
  acc->converged = true;
  LinearOperator B;
  if (v == Variant::M1 || v == Variant::ADEF1) {
    const CholeskyFactor& R = ctx.gamma.factor();
    B = LinearOperator{s.n_gamma, [ctx, ic, acc, &R](const DenseBlock& X) {
                         const DenseBlock Y = spmm(ctx.sys->A_I_gamma, R.solve(X, SolveMode::backward_only));
                         const DenseBlock W = detail::inner_solve(ctx, Y, ic, *acc);
                         return R.solve(spmm(ctx.sys->A_gamma_I, W), SolveMode::forward_only);
                       }};
  } else if (v == Variant::M2 || v == Variant::ADEF2) {
    B = LinearOperator{s.n_gamma, [ctx, ic, acc](const DenseBlock& X) {
                         const DenseBlock W = detail::inner_solve(ctx, spmm(ctx.sys->A_I_gamma, X), ic, *acc);
                         return spmm(ctx.sys->A_gamma_I, W);
                       }};
  } else {
    B = LinearOperator{s.n_I, [ctx, ic, acc](const DenseBlock& X) { return detail::inner_solve(ctx, X, ic, *acc); }};
  }

  NystromBuild out;
  out.approx = nystrom_approx(B, cfg);
  out.inner = *acc;
  const LowRankApprox& a = out.approx;

  BuildInfo info;
  info.requested_rank = cfg.k;
  info.rank_collapsed = a.rank_collapsed;
  info.it_SI = acc->iterations;

  DenseBlock Z;
  if (a.rank() == 0) {
    Z = DenseBlock(s.n_gamma, 0);
  } else if (v == Variant::M1 || v == Variant::ADEF1) {
    Z = ctx.gamma.factor().solve(a.U, SolveMode::backward_only);
  } else if (v == Variant::M2 || v == Variant::ADEF2) {
    Z = ctx.gamma.solve(a.U);
  } else {
    Z = ctx.gamma.solve(spmm(s.A_gamma_I, a.U));
  }

  if (is_adef(v))
    out.precond = TwoLevelPrecond::adapted_deflation(v, ctx, Z, info);
  else
    out.precond = TwoLevelPrecond::additive(v, ctx.gamma, Z, a.Sigma, 1.0, info);
  return out;
}

}  // namespace nschur
