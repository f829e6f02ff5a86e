#pragma once

#include "moo/core.hpp"

namespace moo {

/// Two objectives on R^2 sharing the optimum (0, 1):
///   L1 = x^2 + (y - 1)^2
///   L2 = 20 (exp((x^2 + y^2 - 1)^2) - 1)
/// L2 is zero on the unit circle and very steep away from it.
LossVector toy_losses(std::span<const double> theta);
GradientSet toy_grads(std::span<const double> theta);

inline const Vector kToyOptimum{0.0, 1.0};
inline const Vector kToyInit{0.8, -0.2};

class ToyProblem2D final : public MultiObjectiveProblem {
 public:
  std::size_t dim() const override { return 2; }
  std::size_t num_objectives() const override { return 2; }
  GradientSet gradients(std::span<const double> params, std::size_t) const override {
    return toy_grads(params);
  }
  std::optional<Vector> optimum() const override { return kToyOptimum; }
};

}  // namespace moo
