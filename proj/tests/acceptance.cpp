// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Two desk problems are used throughout:
//   spectral desk: 2D five-point Laplacian 20x20 (n = 400) on 4 blocks, dense oracles
//   trend desk:    2D five-point Laplacian 64x64 (n = 4096) on 16 blocks, 5-seed averages
// Large-matrix checks run only when NSCHUR_BCSSTK38 / NSCHUR_S3RMT3M3 point at
// Matrix Market files; otherwise that part of the line reads "skipped".

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nschur/analysis.hpp"
#include "nschur/gallery.hpp"
#include "nschur/matrix_market.hpp"
#include "nschur/nystrom.hpp"
#include "nschur/precond.hpp"
#include "nschur/solve.hpp"
#include "oracles.hpp"

using namespace nschur;

namespace {

constexpr Index kSpectralM = 20, kSpectralBlocks = 4;
constexpr Index kTrendM = 64, kTrendBlocks = 16;
constexpr unsigned kTrendSeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SchurContext context_for(const SparseMatrix& A, Index blocks) {
  return make_schur_context(assemble_dbbd(A, build_partition(A, blocks, 0)));
}

SchurContext spectral_desk() { return context_for(gallery::laplacian_2d(kSpectralM), kSpectralBlocks); }

const SparseMatrix& trend_matrix() {
  static const SparseMatrix A = gallery::laplacian_2d(kTrendM);
  return A;
}

/// Dense S_G built without the library's Schur operators.
DenseBlock dense_schur(const DBBDSystem& s) {
  return oracle::schur(s.interior.to_dense(), s.A_I_gamma.to_dense(), s.A_gamma_I.to_dense(), s.A_gamma.to_dense());
}

/// Ascending eigenvalues of M S for an SPD preconditioner M given as an operator.
Vector dense_precond_spectrum(const LinearOperator& M, const DenseBlock& S) {
  DenseBlock Md = materialize(M);
  Md = 0.5 * (Md + Md.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseBlock> es(S, Md.inverse(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

struct RunStats {
  double it_pcg = 0.0, it_total = 0.0;
};

/// 5-seed average of the pipeline on the trend desk problem; seed drives sketch and rhs.
RunStats trend_average(Variant v, Index k, Index p, double eps_SI) {
  const SparseMatrix& A = trend_matrix();
  RunStats avg;
  for (unsigned s = 0; s < kTrendSeeds; ++s) {
    PipelineConfig cfg;
    cfg.blocks = kTrendBlocks;
    cfg.variant = v;
    cfg.sketch.k = k;
    cfg.sketch.p = p;
    cfg.sketch.seed = s;
    cfg.eig.seed = s;
    cfg.inner.eps_SI = eps_SI;
    const auto r = solve_full_system(A, uniform_block(A.n(), 1, s).col(0), cfg);
    if (!r.pcg.converged) throw Stagnation(std::string("PCG did not converge for ") + variant_name(v));
    avg.it_pcg += static_cast<double>(r.it_PCG) / kTrendSeeds;
    avg.it_total += static_cast<double>(r.it_total()) / kTrendSeeds;
  }
  return avg;
}

const char* env_path(const char* name) {
  const char* p = std::getenv(name);
  return (p && *p) ? p : nullptr;
}

// --- criteria ------------------------------------------------------------------

Outcome c1_ideal_deflation_spectrum() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = spectral_desk();
  const Index k = 8;
  const DenseBlock S = dense_schur(*ctx.sys);
  const DenseBlock AG = ctx.sys->A_gamma.to_dense();
  // S1^{-1} S_G spectrum from the pencil (S_G, A_G), independent of the library.
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseBlock> one(S, AG, Eigen::EigenvaluesOnly);
  const Vector lam = one.eigenvalues();  // ascending
  const Index n = lam.size();
  Vector expected(n);
  expected << Vector::Ones(k), lam.tail(n - k);
  std::sort(expected.data(), expected.data() + n);
  const Vector got = dense_precond_spectrum(build_ideal_two_level(ctx, k).as_operator(), S);
  const double err = (got - expected).cwiseAbs().maxCoeff();
  const double t = seconds_since(t0);
  return {err <= 1e-8 && t < 10.0, "n_gamma=" + std::to_string(n) + " max|diff|=" + fmt(err) + " (tol 1e-8), " +
                                       fmt(t, 3) + " s (limit 10 s)"};
}

Outcome c2_eigenpair_correspondence() {
  const auto ctx = spectral_desk();
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseBlock> es(dense_schur(*ctx.sys), ctx.sys->A_gamma.to_dense(),
                                                          Eigen::EigenvaluesOnly);
  const Vector lam = es.eigenvalues();                                              // ascending
  const Vector sigma = dense_eig_oracle(HOperator(ctx).as_operator()).eigenvalues;  // descending
  const double err = (lam - (Vector::Ones(sigma.size()) - sigma)).cwiseAbs().maxCoeff();
  return {err <= 1e-10, "max|lambda - (1 - sigma)|=" + fmt(err) + " (tol 1e-10)"};
}

Outcome c3_sherman_morrison_woodbury() {
  const auto ctx = spectral_desk();
  const auto& s = *ctx.sys;
  if (s.n_gamma > 300) return {false, "n_gamma=" + std::to_string(s.n_gamma) + " exceeds 300"};
  const auto& F = ctx.gamma.factor();
  const DenseBlock R = F.R_dense();
  const DenseBlock S = dense_schur(s);
  const DenseBlock SI = oracle::schur(s.A_gamma.to_dense(), s.A_gamma_I.to_dense(), s.A_I_gamma.to_dense(),
                                      s.interior.to_dense());
  double worst = 0.0;
  for (unsigned seed = 0; seed < 10; ++seed) {
    const DenseBlock X = oracle::random_block(s.n_gamma, 4, seed);
    // R S^{-1} R^T - I  against  R^{-T} A_GI S_I^{-1} A_IG R^{-1}.
    const DenseBlock lhs = R * S.lu().solve(R.transpose() * X) - X;
    const DenseBlock Y = spmm(s.A_I_gamma, F.solve(X, SolveMode::backward_only));
    const DenseBlock rhs = F.solve(spmm(s.A_gamma_I, SI.lu().solve(Y)), SolveMode::forward_only);
    worst = std::max(worst, (lhs - rhs).norm() / lhs.norm());
  }
  return {worst <= 1e-9, "n_gamma=" + std::to_string(s.n_gamma) + " worst rel diff=" + fmt(worst) + " (tol 1e-9)"};
}

Outcome c4_nystrom_exactness() {
  const Index n = 120, k = 6;
  double worst = 0.0;
  for (Index r : {1, 3, 6}) {
    for (unsigned seed = 0; seed < 20; ++seed) {
      const DenseBlock G = oracle::random_block(n, r, 100 + seed);
      const DenseBlock B = G * G.transpose();
      SketchConfig sc;
      sc.k = k;
      sc.p = 2;
      sc.seed = seed;
      const auto a = nystrom_approx(dense_operator(B), sc);
      worst = std::max(worst, (reconstruct(a) - B).norm() / B.norm());
    }
  }
  return {worst <= 1e-9, "r in {1,3,6}, k=6, p=2, 20 seeds: worst rel Frobenius=" + fmt(worst) + " (tol 1e-9)"};
}

Outcome c5_cg_error_bound() {
  Index checked = 0, violations = 0;
  double worst_ratio = 0.0;
  for (unsigned s = 0; s < 5; ++s) {
    const Index n = 60 + 35 * static_cast<Index>(s);  // 60 .. 200
    const DenseBlock a = gallery::random_spd_dense(n, std::pow(10.0, 1.0 + s), 10 + s);
    const Vector ev = oracle::eigenvalues(a);
    const double kappa = ev(n - 1) / ev(0);
    const double rho = (std::sqrt(kappa) - 1) / (std::sqrt(kappa) + 1);
    const Vector b = oracle::random_block(n, 1, s).col(0);
    const Vector xs = a.llt().solve(b);
    const double e0 = std::sqrt(xs.dot(a * xs));
    SolverConfig cfg;
    cfg.tol = 1e-12;
    cfg.maxit = 3 * n;
    auto cb = [&](Index k, const Vector& x) {
      const Vector e = x - xs;
      const double ek = std::sqrt(e.dot(a * e));
      const double bound = 2 * e0 * std::pow(rho, static_cast<double>(k));
      // Slack covers rounding once the bound falls to machine level.
      if (ek > bound * (1 + 1e-8) + 1e-10 * e0) ++violations;
      if (bound > 1e-10 * e0) worst_ratio = std::max(worst_ratio, ek / bound);
      ++checked;
    };
    pcg(dense_operator(a), identity_operator(n), b, cfg, nullptr, cb);
  }
  return {checked > 0 && violations == 0, std::to_string(checked) + " iterations checked, " +
                                              std::to_string(violations) + " violations, max error/bound=" +
                                              fmt(worst_ratio)};
}

/// Iterations of classic PCG (max over columns) and block PCG on S_I X = A_IG Omega.
std::pair<Index, Index> classic_vs_block(const SchurContext& ctx, Index cols, std::uint64_t seed, double tol) {
  const auto& s = *ctx.sys;
  const DenseBlock X = spmm(s.A_I_gamma, gaussian_sketch(s.n_gamma, cols, seed));
  const auto op = InnerSchurOperator(ctx).as_operator();
  const auto M = interior_inverse_operator(ctx);
  SolverConfig cfg;
  cfg.tol = tol;
  cfg.maxit = 5000;
  Index worst = 0;
  for (Index j = 0; j < cols; ++j) {
    const auto r = pcg(op, M, X.col(j), cfg);
    if (!r.report.converged) throw Stagnation("classic PCG did not converge");
    worst = std::max(worst, r.report.iterations);
  }
  const auto blk = block_pcg(op, M, X, cfg);
  if (!blk.report.converged) throw Stagnation("block PCG did not converge");
  return {worst, blk.report.iterations};
}

Outcome c6_block_vs_classic() {
  const auto ctx = context_for(trend_matrix(), kTrendBlocks);
  Index ok = 0;
  std::string counts;
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto [classic, block] = classic_vs_block(ctx, 8, seed, 0.1);
    if (block <= classic) ++ok;
    counts += (seed ? " " : "") + std::to_string(block) + "/" + std::to_string(classic);
  }
  bool pass = ok == 10;
  std::string detail = std::to_string(ok) + "/10 seeds block <= classic max (block/classic: " + counts + ")";
  if (const char* path = env_path("NSCHUR_BCSSTK38")) {
    const auto big = context_for(read_matrix_market(path), 64);
    const auto [classic, block] = classic_vs_block(big, 20, 0, 0.1);
    const double ratio = static_cast<double>(classic) / static_cast<double>(block);
    pass = pass && ratio >= 3.0;
    detail += "; bcsstk38 classic=" + std::to_string(classic) + " block=" + std::to_string(block) +
              " ratio=" + fmt(ratio, 3) + " (need >= 3)";
  } else {
    detail += "; large-matrix bcsstk38 check skipped (set NSCHUR_BCSSTK38)";
  }
  return {pass, detail};
}

Outcome c7_eps_si_robustness() {
  const double loose = trend_average(Variant::M2, 16, 0, 0.3).it_pcg;
  const double tight = trend_average(Variant::M2, 16, 0, 0.01).it_pcg;
  const double rel = std::abs(loose - tight) / tight;
  return {rel <= 0.10, "it_PCG(0.3)=" + fmt(loose) + " it_PCG(0.01)=" + fmt(tight) + " rel diff=" + fmt(rel, 3) +
                           " (tol 0.10)"};
}

Outcome c8_rank_sweep() {
  std::vector<double> its;
  std::string detail = "it_PCG over k=5,10,20,40:";
  for (Index k : {5, 10, 20, 40}) {
    its.push_back(trend_average(Variant::M2, k, 0, 0.1).it_pcg);
    detail += " " + fmt(its.back());
  }
  bool pass = true;
  for (std::size_t i = 1; i < its.size(); ++i) pass = pass && its[i] < its[i - 1];
  if (const char* path = env_path("NSCHUR_S3RMT3M3")) {
    const SparseMatrix A = read_matrix_market(path);
    const Vector b = uniform_block(A.n(), 1, 0).col(0);
    PipelineConfig cfg;
    cfg.blocks = 64;
    cfg.variant = Variant::S1;
    const double s1 = static_cast<double>(solve_full_system(A, b, cfg).it_PCG);
    cfg.variant = Variant::M2;
    const double m2 = static_cast<double>(solve_full_system(A, b, cfg).it_PCG);
    const bool ok = std::abs(s1 - 441.0) <= 0.2 * 441.0 && std::abs(m2 - 98.0) <= 0.3 * 98.0;
    pass = pass && ok;
    detail += "; s3rmt3m3 S1=" + fmt(s1) + " (441 +-20%) M2=" + fmt(m2) + " (98 +-30%)";
  } else {
    detail += "; large-matrix s3rmt3m3 check skipped (set NSCHUR_S3RMT3M3)";
  }
  return {pass, detail};
}

Outcome c9_oversampling_sweep() {
  const double ideal = trend_average(Variant::S2, 20, 0, 0.1).it_pcg;
  std::vector<double> its;
  std::string detail = "k=20, it_PCG over p=0,10,40:";
  for (Index p : {0, 10, 40}) {
    its.push_back(trend_average(Variant::M2, 20, p, 0.1).it_pcg);
    detail += " " + fmt(its.back());
  }
  bool pass = true;
  for (std::size_t i = 1; i < its.size(); ++i)
    pass = pass && its[i] <= its[i - 1] && std::abs(its[i] - ideal) <= std::abs(its[i - 1] - ideal);
  return {pass, detail + " toward S2=" + fmt(ideal)};
}

Outcome c10_bound_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = spectral_desk();
  const DenseBlock AG = ctx.sys->A_gamma.to_dense();
  Eigen::LLT<DenseBlock> llt(AG);
  const DenseBlock Rinv = DenseBlock(llt.matrixU()).inverse();
  DenseBlock Ahat = Rinv.transpose() * dense_schur(*ctx.sys) * Rinv;
  Ahat = 0.5 * (Ahat + Ahat.transpose()).eval();
  const Vector lam = oracle::eigenvalues(Ahat);
  const Index n = lam.size(), k = 8, p = 2;
  DenseBlock C = Ahat.inverse() - DenseBlock::Identity(n, n);
  C = 0.5 * (C + C.transpose()).eval();

  bool pass = true;
  double prev_bound = std::numeric_limits<double>::infinity();
  std::string detail = "k=8 p=2:";
  for (Index q : {0, 1, 2}) {
    double mean = 0.0;
    for (unsigned s = 0; s < 20; ++s) {
      SketchConfig sc;
      sc.k = k + p;
      sc.q = q;
      sc.seed = s;
      const auto a = nystrom_approx(dense_operator(C), sc);
      const auto rep = spectrum_of_dense(deflated_operator(Ahat, a.U));
      mean += effective_condition_number(rep, 1e-8 * rep.max()) / 20.0;
    }
    const auto b = nystrom_bound({lam, k, p, q});
    pass = pass && b.hypothesis_ok && mean <= b.value && b.value <= prev_bound;
    prev_bound = b.value;
    detail += " q=" + std::to_string(q) + " mean=" + fmt(mean) + " bound=" + fmt(b.value);
  }
  const double t = seconds_since(t0);
  pass = pass && t < 60.0;
  return {pass, detail + ", " + fmt(t, 3) + " s (limit 60 s)"};
}

Outcome c11_variant_agreement() {
  const Index k = 80;
  const double s1 = trend_average(Variant::S1, k, 0, 0.1).it_total;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::string detail = "k=80:";
  for (Variant v : {Variant::M1, Variant::ADEF1, Variant::M2, Variant::ADEF2, Variant::M3, Variant::ADEF3}) {
    const double it = trend_average(v, k, 0, 0.1).it_total;
    lo = std::min(lo, it);
    hi = std::max(hi, it);
    detail += std::string(" ") + variant_name(v) + "=" + fmt(it);
  }
  const double spread = hi / lo - 1.0;
  const bool pass = spread <= 0.25 && hi <= 0.5 * s1;
  return {pass, detail + " s1=" + fmt(s1) + " spread=" + fmt(spread, 3) + " (tol 0.25), max/s1=" +
                    fmt(hi / s1, 3) + " (need <= 0.5)"};
}

Outcome c12_full_pipeline() {
  struct Problem {
    std::string name;
    SparseMatrix A;
    Index blocks;
    std::vector<Variant> variants;
  };
  const std::vector<Variant> all{Variant::S1,    Variant::S2,    Variant::LiTheta, Variant::M1,   Variant::M2,
                                 Variant::M3,    Variant::ADEF1, Variant::ADEF2,   Variant::ADEF3};
  const std::vector<Problem> problems{
      {"lap1d:400", gallery::laplacian_1d(400), 4, all},
      {"lap2d:20", gallery::laplacian_2d(kSpectralM), kSpectralBlocks, all},
      {"lap2d:64", gallery::laplacian_2d(kTrendM), kTrendBlocks, {Variant::S1, Variant::M2, Variant::ADEF2}},
      {"lap3d:12", gallery::laplacian_3d(12), 8, {Variant::S1, Variant::M2, Variant::ADEF2}},
      {"hetero2d:32", gallery::heterogeneous_2d(32, 1000.0, 1), 16, {Variant::S1, Variant::M2, Variant::M3}},
  };
  double worst_res = 0.0, worst_err = 0.0;
  Index runs = 0;
  std::string failures;
  for (const auto& pr : problems) {
    const Vector b = uniform_block(pr.A.n(), 1, 0).col(0);
    const Vector xd = pr.A.to_dense().llt().solve(b);
    for (Variant v : pr.variants) {
      PipelineConfig cfg;
      cfg.blocks = pr.blocks;
      cfg.variant = v;
      cfg.sketch.k = 8;
      cfg.theta = 0.5;
      cfg.pcg.tol = 1e-10;
      const auto r = solve_full_system(pr.A, b, cfg);
      const double err = (r.x - xd).norm() / xd.norm();
      worst_res = std::max(worst_res, r.true_relative_residual);
      worst_err = std::max(worst_err, err);
      if (!(r.true_relative_residual <= 1e-6 && err <= 1e-5))
        failures += " " + pr.name + "/" + variant_name(v);
      ++runs;
    }
  }
  return {failures.empty(), std::to_string(runs) + " runs, worst residual=" + fmt(worst_res) +
                                " (tol 1e-6), worst rel error vs dense=" + fmt(worst_err) + " (tol 1e-5)" +
                                (failures.empty() ? "" : "; failed:" + failures)};
}

std::string describe(const std::exception& e) {
  std::string s = e.what();
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    s += ": " + describe(inner);
  } catch (...) {
  }
  return s;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ideal deflation spectral identity", c1_ideal_deflation_spectrum},
      {"eigenpair correspondence", c2_eigenpair_correspondence},
      {"Sherman-Morrison-Woodbury identity", c3_sherman_morrison_woodbury},
      {"Nystrom exactness on low-rank input", c4_nystrom_exactness},
      {"CG A-norm error bound", c5_cg_error_bound},
      {"block vs classic PCG", c6_block_vs_classic},
      {"eps_SI robustness", c7_eps_si_robustness},
      {"rank sweep trend", c8_rank_sweep},
      {"oversampling trend", c9_oversampling_sweep},
      {"expectation bound validity", c10_bound_validity},
      {"variant agreement", c11_variant_agreement},
      {"full-pipeline correctness", c12_full_pipeline},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, "error: " + describe(e)};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
