#include "moo/toy_problem.hpp"

#include <cmath>

namespace moo {

namespace {

void check_theta(std::span<const double> theta) {
  if (theta.size() != 2) throw ContractViolation("toy problem: theta must have 2 entries");
  if (!all_finite(theta)) throw ContractViolation("toy problem: non-finite theta");
}

}  // namespace

LossVector toy_losses(std::span<const double> theta) {
  check_theta(theta);
  const double x = theta[0];
  const double y = theta[1];
  const double u = x * x + y * y - 1.0;
  return LossVector{{x * x + (y - 1.0) * (y - 1.0), 20.0 * std::expm1(u * u)}};
}

GradientSet toy_grads(std::span<const double> theta) {
  GradientSet out;
  out.losses = toy_losses(theta);
  const double x = theta[0];
  const double y = theta[1];
  const double u = x * x + y * y - 1.0;
  const double s = 80.0 * u * std::exp(u * u);
  out.grads = {{2.0 * x, 2.0 * (y - 1.0)}, {s * x, s * y}};
  return out;
}

}  // namespace moo
