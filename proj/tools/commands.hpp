#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "moo/dpo.hpp"
#include "moo/optimizer.hpp"

namespace moo::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Bad config or command-line input; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { Toy2D, DpoSim };

struct DpoSettings {
  dpo::SyntheticSpec spec{};
  double beta = 0.5;
  std::size_t batch_size = 8;
  std::vector<fs::path> dataset_files;  // replaces generated data when non-empty
};

struct RunConfig {
  ProblemKind problem = ProblemKind::Toy2D;
  TrainConfig train{};
  Vector init;  // toy2d only
  DpoSettings dpo{};
  fs::path output_dir = ".";
};

/// Parses a RunConfig JSON document. Unknown keys, wrong types and invalid
/// values raise ConfigError. Defaults depend on "problem":
///   toy2d:   lr 5e-3, groupdro_eta 0.01, convergence_tol 0.01, max_steps 5000
///   dpo-sim: lr 0.05, groupdro_eta 0.1, beta 0.5, max_steps 200
/// Both use Frank-Wolfe 20 iterations / 1e-8 and combinator mgda-decoupled.
RunConfig parse_run_config(const std::string& text);

/// Fig. 3-style toy settings for one combinator.
TrainConfig toy_train_config(CombinatorKind kind, int max_steps = 5000);

struct ToyRun {
  CombinatorKind kind;
  Trajectory trajectory;
};

/// All five combinators on the toy problem, in kAllCombinators order.
std::vector<ToyRun> run_toy_suite(int max_steps);

struct DpoRunResult {
  std::vector<dpo::PreferenceDataset> datasets;
  Trajectory trajectory;
  Vector initial_losses;  // full-dataset loss per objective at the reference
  Vector final_losses;    // full-dataset loss per objective after training
};

/// Builds (or loads) the datasets, the reference policy and the schedule, then
/// trains. Throws dpo::EmptyObjectiveError if some objective has no pairs.
DpoRunResult run_dpo_sim(const RunConfig& config);

int cmd_run(const fs::path& config_path, std::ostream& out, std::ostream& err);
int cmd_reproduce_fig3(const fs::path& output_dir, int max_steps, std::ostream& out,
                       std::ostream& err);
/// Exactly one of `file` and `inline_vectors` is set. Accepted forms: a JSON
/// array of vectors, or {"vectors": [...]}.
int cmd_solve(const std::optional<fs::path>& file, const std::optional<std::string>& inline_vectors,
              const SolverConfig& solver, std::ostream& out, std::ostream& err);
int cmd_dpo_sim(const fs::path& config_path, std::ostream& out, std::ostream& err);

}  // namespace moo::cli
