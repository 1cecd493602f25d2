#pragma once

// Run configuration, report types and subcommand bodies of the nschur tool.
// Kept apart from main() so the tests can drive them in-process.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nschur/analysis.hpp"
#include "nschur/gallery.hpp"
#include "nschur/matrix_market.hpp"
#include "nschur/solve.hpp"

namespace nschur::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kBenchCsvHeader = "# format: nschur-bench-csv v1";
inline constexpr const char* kSpectrumCsvHeader = "# format: nschur-spectrum-csv v1";
inline constexpr const char* kReportSchema = "nschur-report v1";

enum ExitCode : int { kConverged = 0, kError = 1, kNotConverged = 2 };

struct RunConfig {
  std::string matrix;  // Matrix Market path or gallery:<name>:<args>
  std::string rhs = "uniform";  // uniform | gaussian | file:PATH
  Index blocks = 64;
  std::string partition_path;
  std::string variant = "m2";
  Index k = 20, p = 0, q = 0;
  double eps_SI = 0.1;
  double theta = 0.0;
  double tol = 1e-6;
  Index maxit = 1000;
  Index inner_maxit = 1000;
  std::uint64_t seed = 0;
  std::string output_path;
};

/// gallery:lap1d:N | gallery:lap2d:M | gallery:lap2d:NX:NY | gallery:lap3d:M | gallery:hetero2d:M:CONTRAST:SEED
inline SparseMatrix load_matrix(const std::string& source) {
  const std::string prefix = "gallery:";
  if (source.rfind(prefix, 0) != 0) return read_matrix_market(source);
  std::vector<std::string> parts;
  std::stringstream ss(source.substr(prefix.size()));
  for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
  auto num = [&](std::size_t i) -> double {
    if (i >= parts.size()) throw InvalidArgument("gallery source '" + source + "' is missing arguments");
    std::size_t used = 0;
    const double v = std::stod(parts[i], &used);
    if (used != parts[i].size()) throw InvalidArgument("bad gallery argument '" + parts[i] + "'");
    return v;
  };
  auto idx = [&](std::size_t i) { return static_cast<Index>(num(i)); };
  const std::string& kind = parts.empty() ? std::string() : parts[0];
  if (kind == "lap1d") return gallery::laplacian_1d(idx(1));
  if (kind == "lap2d") return parts.size() > 2 ? gallery::laplacian_2d(idx(1), idx(2)) : gallery::laplacian_2d(idx(1));
  if (kind == "lap3d") return gallery::laplacian_3d(idx(1));
  if (kind == "hetero2d") return gallery::heterogeneous_2d(idx(1), num(2), static_cast<unsigned>(idx(3)));
  throw InvalidArgument("unknown gallery matrix '" + kind + "'");
}

inline Vector make_rhs(const std::string& kind, Index n, std::uint64_t seed) {
  if (kind == "uniform") return uniform_block(n, 1, seed).col(0);
  if (kind == "gaussian") return gaussian_sketch(n, 1, seed).col(0);
  if (kind.rfind("file:", 0) == 0) {
    const std::string path = kind.substr(5);
    std::ifstream in(path);
    if (!in) throw Error("cannot open right-hand side file: " + path);
    std::vector<double> v;
    for (double x; in >> x;) v.push_back(x);
    if (!in.eof()) throw ParseError(ParseErrorKind::malformed_entry, "non-numeric entry in " + path);
    if (static_cast<Index>(v.size()) != n) throw DimensionMismatch("right-hand side file length", n, v.size());
    return Eigen::Map<const Vector>(v.data(), n);
  }
  throw InvalidArgument("unknown --rhs '" + kind + "' (uniform, gaussian or file:PATH)");
}

inline PipelineConfig pipeline_config(const RunConfig& c, const SparseMatrix& A) {
  PipelineConfig pc;
  pc.blocks = c.blocks;
  pc.partition_seed = 0;
  if (!c.partition_path.empty()) {
    pc.partition = read_partition_file(c.partition_path);
    check_partition_spec(*pc.partition, A.rows());
  }
  pc.variant = parse_variant(c.variant);
  pc.sketch.k = c.k;
  pc.sketch.p = c.p;
  pc.sketch.q = c.q;
  pc.sketch.seed = c.seed;
  pc.theta = c.theta;
  pc.inner.eps_SI = c.eps_SI;
  pc.inner.maxit = c.inner_maxit;
  pc.pcg.tol = c.tol;
  pc.pcg.maxit = c.maxit;
  pc.eig.seed = c.seed;
  return pc;
}

inline json config_json(const RunConfig& c) {
  return json{{"matrix", c.matrix},   {"rhs", c.rhs},     {"blocks", c.blocks}, {"partition", c.partition_path},
              {"variant", c.variant}, {"k", c.k},         {"p", c.p},           {"q", c.q},
              {"eps_SI", c.eps_SI},   {"theta", c.theta}, {"tol", c.tol},       {"maxit", c.maxit},
              {"inner_maxit", c.inner_maxit}, {"seed", c.seed}};
}

struct BenchReport {
  RunConfig config;
  Index n = 0, n_gamma = 0, n_I = 0;
  Index it_SI = 0, it_PCG = 0, it_total = 0;
  Index k_used = 0, p_used = 0, rank = 0;
  bool rank_collapsed = false;
  bool converged = false;
  double true_relative_residual = 0.0;
  double schur_tol = 0.0;
  StageTimes times;
  std::vector<double> residual_history;

  json to_json() const {
    return json{{"schema", kReportSchema},
                {"config", config_json(config)},
                {"n", n},
                {"n_gamma", n_gamma},
                {"n_I", n_I},
                {"k_used", k_used},
                {"p_used", p_used},
                {"rank", rank},
                {"rank_collapsed", rank_collapsed},
                {"it_SI", it_SI},
                {"it_PCG", it_PCG},
                {"it_total", it_total},
                {"converged", converged},
                {"true_relative_residual", true_relative_residual},
                {"schur_tol", schur_tol},
                {"wall_time_s",
                 {{"partition", times.partition},
                  {"factor", times.factor},
                  {"build", times.build},
                  {"solve", times.solve},
                  {"recover", times.recover}}},
                {"residual_history", residual_history}};
  }
};

inline BenchReport run(const RunConfig& c, const SparseMatrix& A, const PipelineConfig& pc) {
  const Vector b = make_rhs(c.rhs, A.rows(), c.seed);
  const PipelineResult r = solve_full_system(A, b, pc);
  BenchReport rep;
  rep.config = c;
  rep.n = r.n;
  rep.n_gamma = r.n_gamma;
  rep.n_I = r.n_I;
  rep.it_SI = r.it_SI;
  rep.it_PCG = r.it_PCG;
  rep.it_total = r.it_total();
  rep.k_used = r.k_used;
  rep.p_used = r.p_used;
  rep.rank = r.build.rank;
  rep.rank_collapsed = r.build.rank_collapsed;
  rep.converged = r.pcg.converged;
  rep.true_relative_residual = r.true_relative_residual;
  rep.schur_tol = r.schur_tol;
  rep.times = r.times;
  rep.residual_history = r.pcg.relative_residual_history;
  return rep;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

/// Prints the error and its nested causes, outermost first.
inline void print_error(std::ostream& os, const std::exception& e, int depth = 0) {
  os << (depth == 0 ? "error: " : "  caused by: ") << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_error(os, inner, depth + 1);
  } catch (...) {
  }
}

inline int cmd_solve(const RunConfig& c, std::ostream& os) {
  const SparseMatrix A = load_matrix(c.matrix);
  const BenchReport rep = run(c, A, pipeline_config(c, A));
  if (!c.output_path.empty()) write_text(c.output_path, rep.to_json().dump(2) + "\n");
  os << "variant=" << c.variant << " n=" << rep.n << " n_gamma=" << rep.n_gamma << " it_SI=" << rep.it_SI
     << " it_PCG=" << rep.it_PCG << " it_total=" << rep.it_total << " converged=" << (rep.converged ? "yes" : "no")
     << " residual=" << std::setprecision(3) << std::scientific << rep.true_relative_residual << '\n';
  return rep.converged ? kConverged : kNotConverged;
}

// ---------------------------------------------------------------------------

enum class SpectrumSelector { H, one_level, two_level, deflated };

inline SpectrumSelector parse_selector(const std::string& s) {
  if (s == "H") return SpectrumSelector::H;
  if (s == "one_level") return SpectrumSelector::one_level;
  if (s == "two_level") return SpectrumSelector::two_level;
  if (s == "deflated") return SpectrumSelector::deflated;
  throw InvalidArgument("unknown spectrum selector '" + s + "' (H, one_level, two_level, deflated)");
}

inline SchurContext context_for(const RunConfig& c, const SparseMatrix& A) {
  const PipelineConfig pc = pipeline_config(c, A);
  const PartitionSpec spec = pc.partition ? *pc.partition : build_partition(A, pc.blocks, pc.partition_seed);
  return make_schur_context(assemble_dbbd(A, spec), pc.gamma, pc.interior);
}

/// Builds the configured preconditioner on an existing context (k and p clamped as in the pipeline).
inline TwoLevelPrecond build_for(const RunConfig& c, const SchurContext& ctx) {
  const Variant v = parse_variant(c.variant);
  if (v == Variant::S1) return build_one_level(ctx);
  EigSource eig;
  eig.seed = c.seed;
  if (v == Variant::S2) return build_ideal_two_level(ctx, std::min(c.k, ctx.n_gamma() - 1), eig);
  if (v == Variant::LiTheta) return build_li_theta(ctx, std::min(c.k, ctx.n_gamma() - 1), c.theta, eig);
  const Index dim = (v == Variant::M3 || v == Variant::ADEF3) ? ctx.n_I() : ctx.n_gamma();
  SketchConfig sc;
  sc.k = std::min(c.k, dim);
  sc.p = std::clamp<Index>(c.p, 0, dim - sc.k);
  sc.q = c.q;
  sc.seed = c.seed;
  InnerSolveConfig ic;
  ic.eps_SI = c.eps_SI;
  ic.maxit = c.inner_maxit;
  return build_nystrom_schur(ctx, v, sc, ic).precond;
}

/// Dense Rhat^{-T} S_G R^{-1} = I - H.
inline DenseBlock dense_ahat(const SchurContext& ctx) {
  DenseBlock H = materialize(HOperator(ctx).as_operator());
  H = 0.5 * (H + H.transpose()).eval();
  return DenseBlock::Identity(H.rows(), H.cols()) - H;
}

/// Nystrom basis of k + p columns for (I - H)^{-1} - I, the operator deflated in the expectation bound.
inline DenseBlock bound_basis(const DenseBlock& Ahat, Index k, Index p, Index q, std::uint64_t seed) {
  const Index n = Ahat.rows();
  DenseBlock C = Ahat.llt().solve(DenseBlock::Identity(n, n)) - DenseBlock::Identity(n, n);
  C = 0.5 * (C + C.transpose()).eval();
  SketchConfig sc;
  sc.k = k + p;
  sc.q = q;
  sc.seed = seed;
  return nystrom_approx(dense_operator(std::move(C)), sc).U;
}

inline Vector spectrum_values(const RunConfig& c, SpectrumSelector sel) {
  const SparseMatrix A = load_matrix(c.matrix);
  const SchurContext ctx = context_for(c, A);
  if (ctx.n_gamma() > kDenseCap)
    throw CapExceeded("n_Gamma = " + std::to_string(ctx.n_gamma()) + " exceeds the dense cap " +
                      std::to_string(kDenseCap));
  switch (sel) {
    case SpectrumSelector::H:
      return dense_eig_oracle(HOperator(ctx).as_operator()).eigenvalues;
    case SpectrumSelector::one_level:
      return preconditioned_spectrum(build_one_level(ctx).as_operator(), SchurOperator(ctx).as_operator()).eigenvalues;
    case SpectrumSelector::two_level:
      return preconditioned_spectrum(build_for(c, ctx).as_operator(), SchurOperator(ctx).as_operator()).eigenvalues;
    case SpectrumSelector::deflated: {
      const DenseBlock Ahat = dense_ahat(ctx);
      const Index k = std::min(c.k, ctx.n_gamma());
      const Index p = std::clamp<Index>(c.p, 0, ctx.n_gamma() - k);
      return spectrum_of_dense(deflated_operator(Ahat, bound_basis(Ahat, k, p, c.q, c.seed))).eigenvalues;
    }
  }
  return {};
}

/// Shortest decimal text that reads back to the same double.
inline std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string spectrum_csv(const Vector& values, const std::string& selector) {
  std::ostringstream os;
  os << kSpectrumCsvHeader << "\n# selector: " << selector << "\n";
  for (Index i = 0; i < values.size(); ++i) os << num(values(i)) << '\n';
  return os.str();
}

inline int cmd_spectrum(const RunConfig& c, const std::string& selector, std::ostream& os) {
  const Vector v = spectrum_values(c, parse_selector(selector));
  const std::string csv = spectrum_csv(v, selector);
  if (c.output_path.empty())
    os << csv;
  else
    write_text(c.output_path, csv);
  return kConverged;
}

// ---------------------------------------------------------------------------

struct Sweep {
  std::vector<Index> ks{20}, ps{0}, qs{0};
  std::vector<double> eps{0.1};
  std::vector<std::string> variants{"m2"};
  std::vector<std::uint64_t> seeds{0};
};

inline std::string bench_csv_columns() {
  return "variant,k,p,q,eps_si,seed,n,n_gamma,it_si,it_pcg,it_total,converged,rel_residual,rank,"
         "t_partition,t_factor,t_build,t_solve,status";
}

inline std::string csv_escape(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// Cartesian product over the sweep; a failing row records its error and the sweep goes on.
inline std::string bench_csv(const RunConfig& base, const Sweep& sw) {
  const SparseMatrix A = load_matrix(base.matrix);
  PipelineConfig pc0 = pipeline_config(base, A);
  if (!pc0.partition) pc0.partition = build_partition(A, pc0.blocks, pc0.partition_seed);
  std::ostringstream os;
  os << kBenchCsvHeader << '\n' << bench_csv_columns() << '\n';
  for (const auto& v : sw.variants)
    for (Index k : sw.ks)
      for (Index p : sw.ps)
        for (Index q : sw.qs)
          for (double e : sw.eps)
            for (std::uint64_t s : sw.seeds) {
              RunConfig c = base;
              c.variant = v;
              c.k = k;
              c.p = p;
              c.q = q;
              c.eps_SI = e;
              c.seed = s;
              os << v << ',' << k << ',' << p << ',' << q << ',' << num(e) << ',' << s << ',';
              try {
                PipelineConfig pc = pipeline_config(c, A);
                pc.partition = pc0.partition;
                const BenchReport r = run(c, A, pc);
                os << r.n << ',' << r.n_gamma << ',' << r.it_SI << ',' << r.it_PCG << ',' << r.it_total << ','
                   << (r.converged ? 1 : 0) << ',' << num(r.true_relative_residual) << ',' << r.rank << ','
                   << num(r.times.partition) << ',' << num(r.times.factor) << ',' << num(r.times.build) << ','
                   << num(r.times.solve)
                   << ",ok\n";
              } catch (const std::exception& ex) {
                os << ",,,,,,,,,,,," << csv_escape(ex.what()) << '\n';
              }
            }
  return os.str();
}

inline int cmd_bench(const RunConfig& base, const Sweep& sw, std::ostream& os) {
  const std::string csv = bench_csv(base, sw);
  if (base.output_path.empty())
    os << csv;
  else
    write_text(base.output_path, csv);
  return kConverged;
}

// ---------------------------------------------------------------------------

/// Expectation bound for each q, optionally with the measured mean kappa_eff over `measure` seeds.
inline json bound_json(const RunConfig& c, const std::vector<Index>& qs, Index measure) {
  const SparseMatrix A = load_matrix(c.matrix);
  const SchurContext ctx = context_for(c, A);
  if (ctx.n_gamma() > kDenseCap) throw CapExceeded("n_Gamma exceeds the dense cap");
  const DenseBlock Ahat = dense_ahat(ctx);
  const Vector lam = spectrum_of_dense(Ahat).eigenvalues.reverse();
  json rows = json::array();
  for (Index q : qs) {
    const BoundReport b = nystrom_bound({lam, c.k, c.p, q});
    json row{{"k", c.k},
             {"p", c.p},
             {"q", q},
             {"bound", b.value},
             {"argmin_t", b.argmin_t},
             {"expected_c", b.expected_c},
             {"hypothesis_lambda_k_le_half", b.hypothesis_ok}};
    if (measure > 0) {
      double mean = 0.0;
      for (Index s = 0; s < measure; ++s) {
        const auto rep = spectrum_of_dense(
            deflated_operator(Ahat, bound_basis(Ahat, c.k, c.p, q, c.seed + static_cast<std::uint64_t>(s))));
        mean += effective_condition_number(rep, 1e-8 * rep.max()) / static_cast<double>(measure);
      }
      row["measured_mean_kappa_eff"] = mean;
      row["seeds"] = measure;
    }
    rows.push_back(row);
  }
  return json{{"schema", "nschur-bound v1"},
              {"config", config_json(c)},
              {"n_gamma", ctx.n_gamma()},
              {"kappa", lam(lam.size() - 1) / lam(0)},
              {"rows", rows}};
}

inline int cmd_bound(const RunConfig& c, const std::vector<Index>& qs, Index measure, std::ostream& os) {
  const std::string text = bound_json(c, qs, measure).dump(2) + "\n";
  if (c.output_path.empty())
    os << text;
  else
    write_text(c.output_path, text);
  return kConverged;
}

inline int cmd_partition(const RunConfig& c, std::ostream& os) {
  const SparseMatrix A = load_matrix(c.matrix);
  const PartitionSpec spec = build_partition(A, c.blocks, 0);
  const DBBDSystem sys = assemble_dbbd(A, spec);
  const ValidationReport v = validate_dbbd(sys, A);
  if (!c.output_path.empty()) {
    std::ofstream out(c.output_path);
    if (!out) throw Error("cannot write " + c.output_path);
    write_partition(spec, out);
  }
  os << "n=" << sys.n() << " blocks=" << sys.n_blocks() << " n_I=" << sys.n_I << " n_gamma=" << sys.n_gamma
     << " valid=" << (v.ok() ? "yes" : "no") << '\n';
  return v.ok() ? kConverged : kError;
}

}  // namespace nschur::cli
