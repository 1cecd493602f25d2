#pragma once

/// \file
/// End-to-end solve of A x = b through the interface Schur complement:
/// partition, factor A_I, build the preconditioner, PCG on S_G, recover x_I.

#include <chrono>
#include <exception>
#include <optional>
#include <string>

#include "nschur/partition.hpp"
#include "nschur/precond.hpp"

namespace nschur {

struct PipelineConfig {
  Index blocks = 64;
  std::uint64_t partition_seed = 0;
  std::optional<PartitionSpec> partition;  // overrides the built-in partitioner
  Variant variant = Variant::M2;
  SketchConfig sketch;  // k = 20, p = 0, q = 0
  double theta = 0.0;   // Li-theta only
  InnerSolveConfig inner;
  EigSource eig;        // S2 and Li-theta
  SolverConfig pcg;     // tol = 1e-6
  GammaSolverOptions gamma;
  CholeskyOptions interior;
};

struct StageTimes {
  double partition = 0.0, factor = 0.0, build = 0.0, solve = 0.0, recover = 0.0;  // seconds
};

struct PipelineResult {
  Vector x;
  SolveReport pcg;
  SolveReport inner;
  BuildInfo build;
  PartitionSpec partition;
  Index n = 0, n_I = 0, n_gamma = 0;
  Index k_used = 0, p_used = 0;  // after clamping to the operator dimension
  Index it_SI = 0, it_PCG = 0;
  double true_relative_residual = 0.0;
  double schur_tol = 0.0;  // tolerance PCG ran with on the Schur system
  StageTimes times;

  Index it_total() const { return it_SI + it_PCG; }
};

namespace detail {

/// Runs f; any exception is rethrown as PipelineError(stage) with the original nested.
template <class F>
auto run_stage(const char* stage, double& seconds, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Timer {
    std::chrono::steady_clock::time_point t0;
    double& out;
    ~Timer() { out = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
  } timer{t0, seconds};
  try {
    return f();
  } catch (const std::exception& e) {
    std::throw_with_nested(PipelineError(stage, e.what()));
  }
}

}  // namespace detail

inline PipelineResult solve_full_system(const SparseMatrix& A, const Vector& b, const PipelineConfig& cfg) {
  if (A.rows() != A.cols()) throw DimensionMismatch("solve_full_system: square matrix", A.rows(), A.cols());
  check_rows("solve_full_system rhs", A.rows(), b.size());
  PipelineResult out;
  out.n = A.rows();

  DBBDSystem sys = detail::run_stage("partition", out.times.partition, [&] {
    out.partition = cfg.partition ? *cfg.partition : build_partition(A, cfg.blocks, cfg.partition_seed);
    check_partition_spec(out.partition, A.rows());
    return assemble_dbbd(A, out.partition);
  });
  out.n_I = sys.n_I;
  out.n_gamma = sys.n_gamma;

  const SchurContext ctx = detail::run_stage("factor", out.times.factor,
                                             [&] { return make_schur_context(std::move(sys), cfg.gamma, cfg.interior); });
  const DBBDSystem& s = *ctx.sys;

  const TwoLevelPrecond M = detail::run_stage("build", out.times.build, [&]() -> TwoLevelPrecond {
    const Variant v = cfg.variant;
    if (v == Variant::S1) return build_one_level(ctx);
    if (v == Variant::S2 || v == Variant::LiTheta) {
      out.k_used = std::clamp<Index>(cfg.sketch.k, 0, std::max<Index>(s.n_gamma - 1, 0));
      return v == Variant::S2 ? build_ideal_two_level(ctx, out.k_used, cfg.eig)
                              : build_li_theta(ctx, out.k_used, cfg.theta, cfg.eig);
    }
    const Index dim = (v == Variant::M3 || v == Variant::ADEF3) ? s.n_I : s.n_gamma;
    SketchConfig sc = cfg.sketch;
    sc.k = std::min(sc.k, dim);
    sc.p = std::clamp<Index>(sc.p, 0, dim - sc.k);
    out.k_used = sc.k;
    out.p_used = sc.p;
    if (sc.k < 1) return TwoLevelPrecond::additive(v, ctx.gamma, DenseBlock(s.n_gamma, 0), Vector(0), 1.0, {});
    auto built = build_nystrom_schur(ctx, v, sc, cfg.inner);
    out.inner = std::move(built.inner);
    return std::move(built.precond);
  });
  out.build = M.info();
  out.it_SI = out.build.it_SI;

  const Vector bp = s.perm.apply(b).col(0);
  const Vector b_I = bp.head(s.n_I), b_G = bp.tail(s.n_gamma);

  const Vector w = detail::run_stage("solve", out.times.solve, [&]() -> Vector {
    Vector f = b_G;
    if (s.n_I > 0) f -= spmm(s.A_gamma_I, ctx.interior->solve(b_I)).col(0);
    // ||b - A x|| = ||f - S_G w|| up to the interior solves, so the Schur
    // tolerance is scaled to hit pcg.tol relative to ||b||.
    SolverConfig pc = cfg.pcg;
    const double fn = f.norm(), bn = b.norm();
    if (fn > bn && fn > 0.0) pc.tol *= bn / fn;
    out.schur_tol = pc.tol;
    auto res = pcg(SchurOperator(ctx).as_operator(), M.as_operator(), f, pc);
    out.pcg = std::move(res.report);
    return res.x;
  });
  out.it_PCG = out.pcg.iterations;

  out.x = detail::run_stage("recover", out.times.recover, [&]() -> Vector {
    Vector xp(s.n());
    if (s.n_I > 0) {
      DenseBlock rhs = b_I;
      if (s.n_gamma > 0) rhs -= spmm(s.A_I_gamma, w);
      xp.head(s.n_I) = ctx.interior->solve(rhs).col(0);
    }
    xp.tail(s.n_gamma) = w;
    return s.perm.apply_inverse(xp).col(0);
  });

  const double bn = b.norm();
  const Vector r = b - spmm(A, out.x).col(0);
  out.true_relative_residual = bn > 0.0 ? r.norm() / bn : r.norm();
  return out;
}

}  // namespace nschur
