#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moo/combinators.hpp"
#include "moo/core.hpp"
#include "moo/minnorm.hpp"

namespace moo {

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(std::size_t dim, double lr);
  bool operator==(const AdamState&) const = default;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::int64_t step)
      : std::runtime_error("non-finite gradient at Adam step " + std::to_string(step)) {}
};

/// A combinator or problem failure, tagged with the training step it hit.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::int64_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

struct AdamStepResult {
  AdamState state;
  Vector params;
};

/// One bias-corrected Adam update.
AdamStepResult adam_step(AdamState state, Vector params, std::span<const double> grad);

enum class LrSchedule { Constant, Cosine };

/// Learning rate for `step` (0-based) of `total_steps`. Cosine ramps linearly
/// over the first ceil(warmup_ratio * total) steps and then anneals to zero.
double scheduled_lr(double base_lr, LrSchedule schedule, double warmup_ratio, std::int64_t step,
                    std::int64_t total_steps);

struct TrainConfig {
  int max_steps = 5000;
  double lr = 5e-3;
  CombinatorKind combinator = CombinatorKind::MGDADecoupled;
  double groupdro_eta = 0.01;
  SolverConfig solver{};
  double convergence_tol = 0.01;
  int record_every = 1;
  std::uint64_t seed = 0;
  LrSchedule lr_schedule = LrSchedule::Constant;
  double warmup_ratio = 0.03;

  void validate() const;
};

struct TrajectoryRecord {
  std::int64_t step = 0;
  Vector params;
  LossVector losses;
  MixWeights weights;
  Vector grad_norms;
  double direction_norm = 0.0;

  bool operator==(const TrajectoryRecord&) const = default;
};

/// Record `s` holds the parameters after s Adam updates, the losses and
/// gradients evaluated there, and the weights the combinator produced from
/// them.
struct Trajectory {
  std::vector<TrajectoryRecord> records;
  std::optional<std::int64_t> converged_at;
  Vector final_params;

  bool operator==(const Trajectory&) const = default;
};

/// ||params - target|| < tol.
bool convergence_check(std::span<const double> params, std::span<const double> target, double tol);

/// Gradient evaluation, combination, and one Adam update per step.
///
/// The loop evaluates at step s = 0, 1, ..., records, and stops if the
/// problem's optimum is within convergence_tol (converged_at = s, the number
/// of updates performed) or s == max_steps; otherwise it applies the combined
/// direction and advances. Records are kept every `record_every` steps plus
/// the final one.
Trajectory train(const MultiObjectiveProblem& problem, const Vector& init, const TrainConfig& config);

}  // namespace moo
