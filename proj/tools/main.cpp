#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  namespace cli = moo::cli;

  CLI::App app{"Multi-objective gradient combination: toy benchmark, min-norm solver, DPO simulator"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Train from a JSON run config");
  run->add_option("config", run_config, "Run config (JSON)")->required();

  std::string fig3_out = "fig3";
  int fig3_steps = 5000;
  auto* fig3 = app.add_subcommand("reproduce-fig3", "Run all five combinators on the 2D toy problem");
  fig3->add_option("--out", fig3_out, "Output directory")->capture_default_str();
  fig3->add_option("--max-steps", fig3_steps, "Step budget per run")->capture_default_str();

  std::optional<std::string> solve_file;
  std::optional<std::string> solve_vec;
  moo::SolverConfig solver;
  auto* solve = app.add_subcommand("solve", "Min-norm point of the convex hull of vectors");
  solve->add_option("--file", solve_file, "JSON file with a vector list");
  solve->add_option("--vec", solve_vec, "Inline JSON vector list, e.g. \"[[1,0],[-1,0]]\"");
  solve->add_option("--max-iterations", solver.max_iterations, "Frank-Wolfe iteration cap")
      ->capture_default_str();
  solve->add_option("--threshold", solver.convergence_threshold, "Frank-Wolfe gap threshold")
      ->capture_default_str();

  std::string dpo_config;
  auto* dpo = app.add_subcommand("dpo-sim", "Tabular multi-objective DPO simulation");
  dpo->add_option("config", dpo_config, "Run config (JSON) with \"problem\": \"dpo-sim\"")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitConfig;
  }

  if (run->parsed()) return cli::cmd_run(run_config, std::cout, std::cerr);
  if (fig3->parsed()) return cli::cmd_reproduce_fig3(fig3_out, fig3_steps, std::cout, std::cerr);
  if (solve->parsed()) {
    std::optional<std::filesystem::path> file;
    if (solve_file) file = *solve_file;
    return cli::cmd_solve(file, solve_vec, solver, std::cout, std::cerr);
  }
  if (dpo->parsed()) return cli::cmd_dpo_sim(dpo_config, std::cout, std::cerr);
  return cli::kExitConfig;
}
