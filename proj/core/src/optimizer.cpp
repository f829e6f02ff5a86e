#include "moo/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace moo {

AdamState AdamState::fresh(std::size_t dim, double lr) {
  AdamState s;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  s.lr = lr;
  return s;
}

AdamStepResult adam_step(AdamState state, Vector params, std::span<const double> grad) {
  const std::size_t d = params.size();
  if (grad.size() != d || state.m.size() != d || state.v.size() != d) {
    throw ContractViolation("adam_step: dimension mismatch");
  }
  ++state.t;
  if (!all_finite(grad)) throw NonFiniteGradient(state.t);

  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < d; ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  return AdamStepResult{std::move(state), std::move(params)};
}

double scheduled_lr(double base_lr, LrSchedule schedule, double warmup_ratio, std::int64_t step,
                    std::int64_t total_steps) {
  if (schedule == LrSchedule::Constant || total_steps <= 0) return base_lr;
  const auto warmup =
      static_cast<std::int64_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
  if (step < warmup) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(std::max<std::int64_t>(1, total_steps - warmup));
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
  if (max_steps < 1) throw ContractViolation("TrainConfig: max_steps must be >= 1");
  if (!(lr > 0.0)) throw ContractViolation("TrainConfig: lr must be > 0");
  if (!(convergence_tol > 0.0)) throw ContractViolation("TrainConfig: convergence_tol must be > 0");
  if (record_every < 1) throw ContractViolation("TrainConfig: record_every must be >= 1");
  if (!(groupdro_eta >= 0.0)) throw ContractViolation("TrainConfig: groupdro_eta must be >= 0");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) {
    throw ContractViolation("TrainConfig: warmup_ratio must be in [0, 1]");
  }
  solver.validate();
}

bool convergence_check(std::span<const double> params, std::span<const double> target, double tol) {
  return l2_distance(params, target) < tol;
}

Trajectory train(const MultiObjectiveProblem& problem, const Vector& init, const TrainConfig& config) {
  config.validate();
  if (init.size() != problem.dim()) {
    throw ContractViolation("train: init has dimension " + std::to_string(init.size()) +
                            ", problem expects " + std::to_string(problem.dim()));
  }
  const auto optimum = problem.optimum();
  Combinator combinator(config.combinator, problem.num_objectives(), config.groupdro_eta,
                        config.solver);
  AdamState adam = AdamState::fresh(init.size(), config.lr);
  Vector params = init;
  Trajectory traj;

  for (std::int64_t step = 0;; ++step) {
    GradientSet grads;
    CombinatorOutput mix;
    Vector direction;
    try {
      grads = problem.gradients(params, static_cast<std::size_t>(step));
      mix = combinator(grads);
      direction = combined_direction(mix.applied_weights, grads);
    } catch (const std::exception& e) {
      throw TrainingError(step, e.what());
    }

    const bool converged = optimum && convergence_check(params, *optimum, config.convergence_tol);
    const bool last = converged || step >= config.max_steps;
    if (last || step % config.record_every == 0) {
      traj.records.push_back(TrajectoryRecord{step, params, grads.losses, mix.applied_weights,
                                              mix.diagnostics.grad_norms, l2_norm(direction)});
    }
    if (converged) traj.converged_at = step;
    if (last) break;

    adam.lr = scheduled_lr(config.lr, config.lr_schedule, config.warmup_ratio, step,
                           config.max_steps);
    try {
      auto next = adam_step(std::move(adam), std::move(params), direction);
      adam = std::move(next.state);
      params = std::move(next.params);
    } catch (const std::exception& e) {
      throw TrainingError(step, e.what());
    }
  }
  traj.final_params = params;
  return traj;
}

}  // namespace moo
