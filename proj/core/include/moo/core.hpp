#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace moo {

using Vector = std::vector<double>;

/// Raised when a caller breaks an operation's precondition (shape mismatch,
/// empty input, non-finite value).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-objective loss values, one entry per objective.
struct LossVector {
  Vector values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const LossVector&) const = default;
};

/// k per-objective gradients of a common dimension, bundled with the losses
/// evaluated at the same parameters.
struct GradientSet {
  std::vector<Vector> grads;
  LossVector losses;

  std::size_t num_objectives() const { return grads.size(); }
  std::size_t dim() const { return grads.empty() ? 0 : grads.front().size(); }

  // Throws ContractViolation on ragged, non-finite or mismatched contents.
  void validate() const;
};

/// Combination coefficients. `simplex` marks weights that sum to one.
struct MixWeights {
  Vector weights;
  bool simplex = true;

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
  bool operator==(const MixWeights&) const = default;

  bool on_simplex(double tol = 1e-9) const;
};

/// Interface for a problem with k objectives over a d-dimensional parameter.
///
/// `step` identifies the training iteration. Deterministic problems ignore
/// it; stochastic ones (minibatched) use it to select the data the
/// evaluation sees, so a given (params, step) pair always evaluates the same.
class MultiObjectiveProblem {
 public:
  virtual ~MultiObjectiveProblem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_objectives() const = 0;
  virtual GradientSet gradients(std::span<const double> params, std::size_t step) const = 0;

  /// Losses only. Defaults to the loss half of gradients() so both paths
  /// share one evaluation.
  virtual LossVector evaluate(std::span<const double> params, std::size_t step) const {
    return gradients(params, step).losses;
  }

  virtual std::optional<Vector> optimum() const { return std::nullopt; }
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double l2_distance(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

/// Sum_i w_i * g_i, accumulated in objective index order.
Vector combined_direction(const MixWeights& weights, const GradientSet& grads);
Vector combined_direction(std::span<const double> weights, const std::vector<Vector>& vectors);

}  // namespace moo
