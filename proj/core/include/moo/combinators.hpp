#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "moo/core.hpp"
#include "moo/minnorm.hpp"

namespace moo {

enum class CombinatorKind { Uniform, GroupDRO, MGDA, MGDANormalised, MGDADecoupled };

inline constexpr std::array<CombinatorKind, 5> kAllCombinators = {
    CombinatorKind::Uniform, CombinatorKind::GroupDRO, CombinatorKind::MGDA,
    CombinatorKind::MGDANormalised, CombinatorKind::MGDADecoupled};

/// CLI name: uniform, groupdro, mgda, mgda-normalised, mgda-decoupled.
std::string_view to_string(CombinatorKind kind);
std::optional<CombinatorKind> parse_combinator(std::string_view name);
/// "uniform, groupdro, ..." for diagnostics.
std::string combinator_names();

/// Every gradient of an MGDA-Normalised problem fell below the norm floor.
class ZeroGradientError : public std::runtime_error {
 public:
  explicit ZeroGradientError(std::size_t objective);
  std::size_t objective() const { return objective_; }

 private:
  std::size_t objective_;
};

inline constexpr double kLossFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;

struct GroupDroState {
  MixWeights weights;
  double eta = 0.01;

  /// Uniform starting weights.
  static GroupDroState initial(std::size_t k, double eta);
};

struct CombinatorDiagnostics {
  Vector grad_norms;
  Vector losses;
  Vector polyak;  // loss / ||grad||, +inf at a stationary point
  std::optional<int> solver_iterations;
};

struct CombinatorOutput {
  MixWeights applied_weights;   // multiplied onto the raw gradients
  MixWeights internal_weights;  // simplex solution before rescaling
  CombinatorDiagnostics diagnostics;
};

CombinatorOutput uniform_weights(std::size_t k);

/// Multiplicative exponentiated-loss update. The maximum loss is subtracted
/// before exponentiating; the ratio is unchanged by the shift.
GroupDroState groupdro_update(const GroupDroState& state, const LossVector& losses);

/// Min-norm weights over the raw gradients.
CombinatorOutput mgda_weights(const GradientSet& grads, const SolverConfig& config);

/// Min-norm weights c' over unit gradients, applied as c'_i / ||g_i||.
///
/// Objectives whose gradient norm is at or below kNormFloor are left out of
/// the min-norm problem and get weight zero. Throws ZeroGradientError if no
/// objective remains. A single objective is applied with weight 1.
CombinatorOutput mgda_normalised_weights(const GradientSet& grads, const SolverConfig& config);

/// Min-norm weights over loss-scaled gradients g_i / L_i, applied to the raw
/// gradients. Objectives with loss at or below kLossFloor count as converged:
/// they get weight zero and the rest are solved on the reduced set. If every
/// objective has converged the weights fall back to uniform.
CombinatorOutput mgda_decoupled_weights(const GradientSet& grads, const SolverConfig& config);

/// L / ||g||; +inf when the gradient is zero.
double polyak_proxy(double loss, std::span<const double> grad);

/// Per-objective norms, losses and Polyak proxies of a gradient set.
CombinatorDiagnostics diagnose(const GradientSet& grads);

/// Runs one combinator for a training step. For GroupDRO the carried state is
/// advanced with the current losses first and the new weights are returned.
class Combinator {
 public:
  Combinator(CombinatorKind kind, std::size_t num_objectives, double groupdro_eta,
             SolverConfig solver);

  CombinatorOutput operator()(const GradientSet& grads);

  CombinatorKind kind() const { return kind_; }
  const std::optional<GroupDroState>& groupdro_state() const { return groupdro_; }

 private:
  CombinatorKind kind_;
  SolverConfig solver_;
  std::optional<GroupDroState> groupdro_;
};

}  // namespace moo
