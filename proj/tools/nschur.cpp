#include <iostream>

#include "CLI11.hpp"
#include "cli.hpp"

using nschur::Index;
namespace cli = nschur::cli;

namespace {

void add_problem_options(CLI::App* sub, cli::RunConfig& c) {
  sub->add_option("--matrix", c.matrix, "Matrix Market file or gallery:<name>:<args>")->required();
  sub->add_option("--blocks", c.blocks, "interior blocks for the built-in partitioner (power of two)");
  sub->add_option("--partition", c.partition_path, "partition file, one label per row (block id or G)");
  sub->add_option("--out", c.output_path, "output file");
}

void add_run_options(CLI::App* sub, cli::RunConfig& c) {
  sub->add_option("--rhs", c.rhs, "uniform, gaussian or file:PATH");
  sub->add_option("--theta", c.theta, "Li-theta shift");
  sub->add_option("--tol", c.tol, "PCG relative tolerance");
  sub->add_option("--maxit", c.maxit, "PCG iteration cap");
  sub->add_option("--inner-maxit", c.inner_maxit, "iteration cap of the inner S_I block solve");
}

void add_scalar_sketch_options(CLI::App* sub, cli::RunConfig& c) {
  sub->add_option("--variant", c.variant, "s1, s2, li, m1, m2, m3, adef1, adef2, adef3");
  sub->add_option("--k", c.k, "rank");
  sub->add_option("--p", c.p, "oversampling");
  sub->add_option("--q", c.q, "power iterations");
  sub->add_option("--eps-si", c.eps_SI, "inner S_I tolerance");
  sub->add_option("--seed", c.seed, "sketch and right-hand side seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level Nystrom-Schur preconditioners for sparse SPD systems"};
  app.require_subcommand(1);

  cli::RunConfig solve_cfg, spec_cfg, bench_cfg, bound_cfg, part_cfg;

  auto* solve = app.add_subcommand("solve", "solve A x = b through the interface Schur complement");
  add_problem_options(solve, solve_cfg);
  add_run_options(solve, solve_cfg);
  add_scalar_sketch_options(solve, solve_cfg);

  std::string selector = "one_level";
  auto* spectrum = app.add_subcommand("spectrum", "dense eigenvalues of a preconditioned Schur operator (CSV)");
  add_problem_options(spectrum, spec_cfg);
  add_run_options(spectrum, spec_cfg);
  add_scalar_sketch_options(spectrum, spec_cfg);
  spectrum->add_option("--selector", selector, "H, one_level, two_level or deflated");

  cli::Sweep sweep;
  auto* bench = app.add_subcommand("bench", "Cartesian sweep, one CSV row per run");
  add_problem_options(bench, bench_cfg);
  add_run_options(bench, bench_cfg);
  bench->add_option("--variant", sweep.variants, "variants")->delimiter(',');
  bench->add_option("--k", sweep.ks, "ranks")->delimiter(',');
  bench->add_option("--p", sweep.ps, "oversampling values")->delimiter(',');
  bench->add_option("--q", sweep.qs, "power iteration counts")->delimiter(',');
  bench->add_option("--eps-si", sweep.eps, "inner tolerances")->delimiter(',');
  bench->add_option("--seed", sweep.seeds, "seeds")->delimiter(',');

  std::vector<Index> bound_qs{0, 1, 2};
  Index measure = 0;
  bound_cfg.p = 2;
  auto* bound = app.add_subcommand("bound", "expectation bound on kappa_eff of Nystrom deflation (JSON)");
  add_problem_options(bound, bound_cfg);
  bound->add_option("--k", bound_cfg.k, "rank");
  bound->add_option("--p", bound_cfg.p, "oversampling (>= 2)");
  bound->add_option("--q", bound_qs, "power iteration counts")->delimiter(',');
  bound->add_option("--seed", bound_cfg.seed, "first seed of the measurement");
  bound->add_option("--measure", measure, "seeds over which to measure the mean kappa_eff (0 = skip)");

  auto* partition = app.add_subcommand("partition", "write the built-in partition of a matrix");
  add_problem_options(partition, part_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kError;
  }

  try {
    if (*solve) return cli::cmd_solve(solve_cfg, std::cout);
    if (*spectrum) return cli::cmd_spectrum(spec_cfg, selector, std::cout);
    if (*bench) return cli::cmd_bench(bench_cfg, sweep, std::cout);
    if (*bound) return cli::cmd_bound(bound_cfg, bound_qs, measure, std::cout);
    if (*partition) return cli::cmd_partition(part_cfg, std::cout);
  } catch (const std::exception& e) {
    cli::print_error(std::cerr, e);
    return cli::kError;
  }
  return cli::kError;
}
