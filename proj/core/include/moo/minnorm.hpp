#pragma once

#include <cstddef>
#include <vector>

#include "moo/core.hpp"

namespace moo {

/// Frank-Wolfe stopping rule. Defaults are the settings used for training.
struct SolverConfig {
  int max_iterations = 20;
  double convergence_threshold = 1e-8;

  void validate() const;
};

/// Minimum-norm point of the convex hull of a vector set.
struct MinNormSolution {
  MixWeights weights;  // simplex
  Vector point;        // sum_i weights[i] * v_i
  double norm = 0.0;   // ||point||
  int iterations = 0;
  bool converged = false;
};

/// Active-weight cutoff used when checking optimality conditions.
inline constexpr double kActiveWeightTol = 1e-7;

/// M[i][j] = <v_i, v_j>.
std::vector<Vector> gram_matrix(const std::vector<Vector>& vectors);

/// Exact minimiser of ||g v1 + (1-g) v2|| over g in [0, 1]. Identical inputs
/// return g = 0.5.
MinNormSolution min_norm_pair(std::span<const double> v1, std::span<const double> v2);

/// Frank-Wolfe over the probability simplex, started from uniform weights.
///
/// Each iteration computes the Frank-Wolfe vertex (smallest <v_i, p>) and the
/// away vertex (largest <v_i, p> among vertices with positive weight). The
/// toward step line-searches exactly on the segment [p, v_j]; when the away
/// gap dominates, weight is moved off the away vertex instead, again with an
/// exact line search clipped so the weight stays nonnegative. Away steps let
/// the iterate drop vertices that vanilla Frank-Wolfe only ever shrinks
/// geometrically.
///
/// Stops once both gaps are <= convergence_threshold and the point either has
/// norm <= convergence_threshold / 2 or satisfies min_i <v_i, p> > |p|^2 / 2,
/// or at max_iterations.
///
/// The result is then finished exactly: an active-set pass solves the bordered
/// Gram system on the face Frank-Wolfe reached. When the optimal weights are
/// not unique (duplicate vectors, or the origin inside the hull of more than
/// dim + 1 vectors) the smallest-|w| optimal weights over the active vectors
/// are returned, so duplicates share weight equally and the answer does not
/// depend on the iteration path. converged reflects the stopping test on the
/// finished point.
/// k == 1 returns weight (1); k == 2 uses min_norm_pair.
MinNormSolution min_norm_point(const std::vector<Vector>& vectors, const SolverConfig& config = {});

/// Largest violation of the optimality conditions for a candidate solution:
/// max over i of (||p||^2 - <v_i, p>)_+, and of |<v_i, p> - ||p||^2| over
/// vertices with weight above `active_tol`.
double kkt_residual(const std::vector<Vector>& vectors, const MinNormSolution& solution,
                    double active_tol = kActiveWeightTol);

}  // namespace moo
