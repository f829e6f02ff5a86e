#include "moo/core.hpp"

#include <cmath>
#include <string>

namespace moo {

void GradientSet::validate() const {
  if (grads.empty()) {
    throw ContractViolation("GradientSet: no objectives");
  }
  if (losses.size() != grads.size()) {
    throw ContractViolation("GradientSet: " + std::to_string(grads.size()) + " gradients but " +
                            std::to_string(losses.size()) + " losses");
  }
  const std::size_t d = grads.front().size();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != d) {
      throw ContractViolation("GradientSet: gradient " + std::to_string(i) + " has dimension " +
                              std::to_string(grads[i].size()) + ", expected " + std::to_string(d));
    }
    if (!all_finite(grads[i])) {
      throw ContractViolation("GradientSet: gradient " + std::to_string(i) + " is not finite");
    }
  }
  if (!all_finite(losses.values)) {
    throw ContractViolation("GradientSet: non-finite loss");
  }
}

bool MixWeights::on_simplex(double tol) const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) return false;
    sum += w;
  }
  return std::abs(sum - 1.0) <= tol;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractViolation("dot: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) {
  // Scaled accumulation so tiny or huge entries neither underflow nor overflow.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : v) {
    const double r = x / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractViolation("l2_distance: dimension mismatch");
  }
  Vector diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return l2_norm(diff);
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Vector combined_direction(std::span<const double> weights, const std::vector<Vector>& vectors) {
  if (weights.size() != vectors.size()) {
    throw ContractViolation("combined_direction: " + std::to_string(weights.size()) +
                            " weights for " + std::to_string(vectors.size()) + " gradients");
  }
  if (vectors.empty()) return {};
  const std::size_t d = vectors.front().size();
  Vector out(d, 0.0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) {
      throw ContractViolation("combined_direction: gradient " + std::to_string(i) +
                              " has mismatched dimension");
    }
    const double w = weights[i];
    for (std::size_t j = 0; j < d; ++j) out[j] += w * vectors[i][j];
  }
  return out;
}

Vector combined_direction(const MixWeights& weights, const GradientSet& grads) {
  return combined_direction(weights.weights, grads.grads);
}

}  // namespace moo
