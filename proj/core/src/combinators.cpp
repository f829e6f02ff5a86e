#include "moo/combinators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace moo {

namespace {

MixWeights uniform_mix(std::size_t k) {
  return MixWeights{Vector(k, 1.0 / static_cast<double>(k)), true};
}

// Solves the min-norm problem over the vectors whose index is in `keep` and
// scatters the weights back to a length-k vector with zeros elsewhere.
MinNormSolution solve_subset(const std::vector<Vector>& vectors, const std::vector<std::size_t>& keep,
                             const SolverConfig& config, Vector& full_weights) {
  std::vector<Vector> subset;
  subset.reserve(keep.size());
  for (std::size_t i : keep) subset.push_back(vectors[i]);
  auto sol = min_norm_point(subset, config);
  full_weights.assign(vectors.size(), 0.0);
  for (std::size_t j = 0; j < keep.size(); ++j) full_weights[keep[j]] = sol.weights[j];
  return sol;
}

}  // namespace

std::string_view to_string(CombinatorKind kind) {
  switch (kind) {
    case CombinatorKind::Uniform: return "uniform";
    case CombinatorKind::GroupDRO: return "groupdro";
    case CombinatorKind::MGDA: return "mgda";
    case CombinatorKind::MGDANormalised: return "mgda-normalised";
    case CombinatorKind::MGDADecoupled: return "mgda-decoupled";
  }
  return "unknown";
}

std::optional<CombinatorKind> parse_combinator(std::string_view name) {
  for (auto kind : kAllCombinators) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string combinator_names() {
  std::string out;
  for (auto kind : kAllCombinators) {
    if (!out.empty()) out += ", ";
    out += to_string(kind);
  }
  return out;
}

ZeroGradientError::ZeroGradientError(std::size_t objective)
    : std::runtime_error("zero gradient: objective " + std::to_string(objective) +
                         " has gradient norm below the floor"),
      objective_(objective) {}

GroupDroState GroupDroState::initial(std::size_t k, double eta) {
  if (k == 0) throw ContractViolation("GroupDroState: k must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw ContractViolation("GroupDroState: eta must be finite and >= 0");
  }
  return GroupDroState{uniform_mix(k), eta};
}

CombinatorOutput uniform_weights(std::size_t k) {
  if (k == 0) throw ContractViolation("uniform_weights: k must be >= 1");
  auto w = uniform_mix(k);
  return CombinatorOutput{w, w, {}};
}

GroupDroState groupdro_update(const GroupDroState& state, const LossVector& losses) {
  const std::size_t k = state.weights.size();
  if (losses.size() != k) {
    throw ContractViolation("groupdro_update: " + std::to_string(losses.size()) + " losses for " +
                            std::to_string(k) + " weights");
  }
  if (!all_finite(losses.values)) {
    throw ContractViolation("groupdro_update: non-finite loss");
  }
  const double max_loss = *std::max_element(losses.values.begin(), losses.values.end());
  Vector next(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    next[i] = state.weights[i] * std::exp(state.eta * (losses[i] - max_loss));
    total += next[i];
  }
  for (double& w : next) w /= total;
  return GroupDroState{MixWeights{std::move(next), true}, state.eta};
}

double polyak_proxy(double loss, std::span<const double> grad) {
  const double n = l2_norm(grad);
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  return loss / n;
}

CombinatorDiagnostics diagnose(const GradientSet& grads) {
  CombinatorDiagnostics d;
  const std::size_t k = grads.num_objectives();
  d.grad_norms.resize(k);
  d.polyak.resize(k);
  d.losses = grads.losses.values;
  for (std::size_t i = 0; i < k; ++i) {
    d.grad_norms[i] = l2_norm(grads.grads[i]);
    d.polyak[i] = polyak_proxy(grads.losses[i], grads.grads[i]);
  }
  return d;
}

CombinatorOutput mgda_weights(const GradientSet& grads, const SolverConfig& config) {
  grads.validate();
  auto sol = min_norm_point(grads.grads, config);
  auto diag = diagnose(grads);
  diag.solver_iterations = sol.iterations;
  return CombinatorOutput{sol.weights, sol.weights, std::move(diag)};
}

CombinatorOutput mgda_normalised_weights(const GradientSet& grads, const SolverConfig& config) {
  grads.validate();
  auto diag = diagnose(grads);
  const std::size_t k = grads.num_objectives();

  std::vector<std::size_t> keep;
  std::vector<Vector> units(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double n = diag.grad_norms[i];
    if (n <= kNormFloor) continue;
    keep.push_back(i);
    units[i] = grads.grads[i];
    for (double& x : units[i]) x /= n;
  }
  if (keep.empty()) throw ZeroGradientError(0);

  if (k == 1) {
    MixWeights one{{1.0}, true};
    return CombinatorOutput{one, one, std::move(diag)};
  }

  Vector internal;
  auto sol = solve_subset(units, keep, config, internal);
  diag.solver_iterations = sol.iterations;
  Vector applied(k, 0.0);
  for (std::size_t i : keep) applied[i] = internal[i] / diag.grad_norms[i];
  return CombinatorOutput{MixWeights{std::move(applied), false},
                          MixWeights{std::move(internal), true}, std::move(diag)};
}

CombinatorOutput mgda_decoupled_weights(const GradientSet& grads, const SolverConfig& config) {
  grads.validate();
  auto diag = diagnose(grads);
  const std::size_t k = grads.num_objectives();

  std::vector<std::size_t> keep;
  std::vector<Vector> scaled(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double loss = grads.losses[i];
    if (loss <= kLossFloor) continue;
    keep.push_back(i);
    scaled[i] = grads.grads[i];
    for (double& x : scaled[i]) x /= loss;
  }
  if (keep.empty()) {
    auto w = uniform_mix(k);
    return CombinatorOutput{w, w, std::move(diag)};
  }

  Vector weights;
  auto sol = solve_subset(scaled, keep, config, weights);
  diag.solver_iterations = sol.iterations;
  MixWeights mix{std::move(weights), true};
  return CombinatorOutput{mix, mix, std::move(diag)};
}

Combinator::Combinator(CombinatorKind kind, std::size_t num_objectives, double groupdro_eta,
                       SolverConfig solver)
    : kind_(kind), solver_(solver) {
  if (num_objectives == 0) throw ContractViolation("Combinator: no objectives");
  solver_.validate();
  if (kind == CombinatorKind::GroupDRO) {
    groupdro_ = GroupDroState::initial(num_objectives, groupdro_eta);
  }
}

CombinatorOutput Combinator::operator()(const GradientSet& grads) {
  switch (kind_) {
    case CombinatorKind::Uniform: {
      auto out = uniform_weights(grads.num_objectives());
      out.diagnostics = diagnose(grads);
      return out;
    }
    case CombinatorKind::GroupDRO: {
      groupdro_ = groupdro_update(*groupdro_, grads.losses);
      return CombinatorOutput{groupdro_->weights, groupdro_->weights, diagnose(grads)};
    }
    case CombinatorKind::MGDA: return mgda_weights(grads, solver_);
    case CombinatorKind::MGDANormalised: return mgda_normalised_weights(grads, solver_);
    case CombinatorKind::MGDADecoupled: return mgda_decoupled_weights(grads, solver_);
  }
  throw ContractViolation("Combinator: unknown kind");
}

}  // namespace moo
