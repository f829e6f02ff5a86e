#include "moo/minnorm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

namespace moo {

namespace {

void check_vectors(const std::vector<Vector>& vectors, const char* where) {
  if (vectors.empty()) {
    throw ContractViolation(std::string(where) + ": empty vector set");
  }
  const std::size_t d = vectors.front().size();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) {
      throw ContractViolation(std::string(where) + ": vector " + std::to_string(i) +
                              " has dimension " + std::to_string(vectors[i].size()) +
                              ", expected " + std::to_string(d));
    }
    if (!all_finite(vectors[i])) {
      throw ContractViolation(std::string(where) + ": vector " + std::to_string(i) +
                              " has non-finite entries");
    }
  }
}

// Weight on the first endpoint of the exact line search between two points
// a and b, from <a, b>, ||b||^2 and ||a - b||^2.
double segment_weight(double cross, double sq2, double dist_sq) {
  if (dist_sq <= 0.0) return 0.5;
  const double g = (sq2 - cross) / dist_sq;
  return std::clamp(g, 0.0, 1.0);
}

MinNormSolution finish(const std::vector<Vector>& vectors, Vector weights, int iterations,
                       bool converged) {
  double sum = 0.0;
  for (double& w : weights) {
    w = std::max(w, 0.0);
    sum += w;
  }
  for (double& w : weights) w /= sum;
  MinNormSolution sol;
  sol.point = combined_direction(weights, vectors);
  sol.norm = l2_norm(sol.point);
  sol.weights = MixWeights{std::move(weights), true};
  sol.iterations = iterations;
  sol.converged = converged;
  return sol;
}

// Solves a x = b in place by Gaussian elimination with partial pivoting.
// Returns false if a pivot falls below `tiny`.
bool solve_linear(std::vector<Vector> a, Vector b, Vector& x, double tiny) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (std::abs(a[piv][c]) <= tiny) return false;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t j = r + 1; j < n; ++j) s -= a[r][j] * x[j];
    x[r] = s / a[r][r];
  }
  return true;
}

// Minimiser of ||sum_{i in S} l_i v_i|| subject to sum l_i = 1 (no sign
// constraint), from the bordered Gram system. The system is solved in the
// variables l_i |v_i| so pivots compare angles rather than lengths. False if
// S is affinely dependent to working precision.
bool affine_min_norm(const std::vector<Vector>& gram, const std::vector<std::size_t>& support,
                     Vector& lambda) {
  const std::size_t m = support.size();
  Vector s(m);
  double border = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double diag = gram[support[r]][support[r]];
    if (!(diag > 0.0)) return false;
    s[r] = 1.0 / std::sqrt(diag);
    border = std::max(border, s[r]);
  }
  std::vector<Vector> a(m + 1, Vector(m + 1, 0.0));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) a[r][c] = s[r] * gram[support[r]][support[c]] * s[c];
    a[r][m] = s[r] / border;
    a[m][r] = s[r] / border;
  }
  Vector b(m + 1, 0.0);
  b[m] = 1.0 / border;
  Vector x;
  if (!solve_linear(std::move(a), std::move(b), x, 1e-13)) return false;
  lambda.resize(m);
  for (std::size_t r = 0; r < m; ++r) lambda[r] = s[r] * x[r];
  return true;
}

// Exact correction on the face found by Frank-Wolfe: an active-set pass over
// the Gram matrix. Each round jumps to the affine minimiser on the current
// support, stepping back to the simplex boundary and dropping a vertex when
// that minimiser has a negative weight, and otherwise adds the best improving
// vertex. Returns nullopt if the support becomes affinely dependent or the
// rounds run out.
std::optional<Vector> polish(const std::vector<Vector>& gram, const Vector& w) {
  const std::size_t k = gram.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) scale = std::max(scale, gram[i][i]);
  if (!(scale > 0.0)) return std::nullopt;

  Vector x = w;
  for (double& xi : x) {
    if (xi < 1e-12) xi = 0.0;
  }
  Vector inner(k);
  bool done = false;
  for (std::size_t round = 0; round < 8 * k && !done; ++round) {
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < k; ++i) {
      if (x[i] > 0.0) support.push_back(i);
    }
    Vector lambda;
    if (!affine_min_norm(gram, support, lambda)) return std::nullopt;

    double t = 1.0;  // x + t (lambda - x) stays on the simplex
    std::size_t blocking = k;
    for (std::size_t r = 0; r < support.size(); ++r) {
      const double xi = x[support[r]];
      if (lambda[r] < 0.0) {
        const double tr = xi / (xi - lambda[r]);
        if (tr < t) {
          t = tr;
          blocking = support[r];
        }
      }
    }
    for (std::size_t r = 0; r < support.size(); ++r) {
      const std::size_t i = support[r];
      x[i] = i == blocking ? 0.0 : x[i] + t * (lambda[r] - x[i]);
    }
    if (blocking != k) continue;

    double q = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      inner[i] = 0.0;
      for (std::size_t j = 0; j < k; ++j) inner[i] += gram[i][j] * x[j];
      q += x[i] * inner[i];
    }
    std::size_t toward = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (inner[i] < inner[toward]) toward = i;
    }
    if (q - inner[toward] <= 1e-14 * scale || x[toward] > 0.0) {
      done = true;
      break;
    }
    const double dist_sq = q - 2.0 * inner[toward] + gram[toward][toward];
    const double g = segment_weight(inner[toward], gram[toward][toward], dist_sq);
    for (double& xi : x) xi *= g;
    x[toward] += 1.0 - g;
  }
  if (!done) return std::nullopt;

  double sum = 0.0;
  for (double& xi : x) {
    xi = std::max(xi, 0.0);
    sum += xi;
  }
  if (!(sum > 0.0)) return std::nullopt;
  for (double& xi : x) xi /= sum;
  return x;
}

// Smallest-|x| solution of sum_r x_r v_{S_r} = target, sum_r x_r = 1 (no
// sign constraint), found by orthonormalising the rows of [V_S; 1^T] with
// modified Gram-Schmidt, twice. Nullopt if the target is not reached.
std::optional<Vector> least_norm_affine(const std::vector<Vector>& vectors,
                                        const std::vector<std::size_t>& support,
                                        const Vector& target) {
  const std::size_t m = support.size();
  std::vector<Vector> q;
  Vector c;
  const auto add_row = [&](Vector a, double beta) {
    const double a_norm = l2_norm(a);
    if (!(a_norm > 0.0)) return;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t r = 0; r < q.size(); ++r) {
        const double coef = dot(q[r], a);
        for (std::size_t j = 0; j < m; ++j) a[j] -= coef * q[r][j];
        beta -= coef * c[r];
      }
    }
    const double rest = l2_norm(a);
    if (rest <= 1e-10 * a_norm) return;
    for (double& aj : a) aj /= rest;
    q.push_back(std::move(a));
    c.push_back(beta / rest);
  };
  add_row(Vector(m, 1.0), 1.0);
  for (std::size_t j = 0; j < target.size() && q.size() < m; ++j) {
    Vector a(m);
    for (std::size_t r = 0; r < m; ++r) a[r] = vectors[support[r]][j];
    add_row(std::move(a), target[j]);
  }
  Vector x(m, 0.0);
  for (std::size_t r = 0; r < q.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) x[j] += c[r] * q[r][j];
  }
  Vector p(target.size(), 0.0);
  double mass = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const Vector& v = vectors[support[r]];
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += x[r] * v[j];
    mass += std::abs(x[r]) * l2_norm(v);
  }
  for (std::size_t j = 0; j < p.size(); ++j) p[j] -= target[j];
  if (!(l2_norm(p) <= 1e-10 * mass)) return std::nullopt;
  return x;
}

// Smallest-|w| weights on the simplex, supported on `support`, with
// sum_i w_i v_i = target. The minimiser is the unconstrained affine solution
// on its own support, so small supports are searched exhaustively.
std::optional<Vector> least_norm_weights(const std::vector<Vector>& vectors,
                                         const std::vector<std::size_t>& support,
                                         const Vector& target) {
  const std::size_t k = vectors.size();
  const auto nonnegative = [](const Vector& x) {
    return std::all_of(x.begin(), x.end(), [](double xi) { return xi >= -1e-12; });
  };
  std::optional<Vector> best;
  std::vector<std::size_t> best_support;
  double best_sq = std::numeric_limits<double>::infinity();
  const auto consider = [&](const std::vector<std::size_t>& s) {
    auto x = least_norm_affine(vectors, s, target);
    if (!x || !nonnegative(*x)) return;
    const double sq = dot(*x, *x);
    if (sq < best_sq) {
      best_sq = sq;
      best = std::move(x);
      best_support = s;
    }
  };
  consider(support);
  if (!best && support.size() <= 12) {
    const std::size_t m = support.size();
    for (std::uint32_t mask = 1; mask + 1 < (1u << m); ++mask) {
      std::vector<std::size_t> s;
      for (std::size_t r = 0; r < m; ++r) {
        if (mask & (1u << r)) s.push_back(support[r]);
      }
      consider(s);
    }
  }
  if (!best) return std::nullopt;

  Vector w(k, 0.0);
  double sum = 0.0;
  for (std::size_t r = 0; r < best_support.size(); ++r) {
    w[best_support[r]] = std::max((*best)[r], 0.0);
    sum += w[best_support[r]];
  }
  if (!(sum > 0.0)) return std::nullopt;
  for (double& wi : w) wi /= sum;
  return w;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iterations < 1) {
    throw ContractViolation("SolverConfig: max_iterations must be >= 1");
  }
  if (!(convergence_threshold > 0.0)) {
    throw ContractViolation("SolverConfig: convergence_threshold must be > 0");
  }
}

std::vector<Vector> gram_matrix(const std::vector<Vector>& vectors) {
  if (vectors.empty()) return {};
  check_vectors(vectors, "gram_matrix");
  const std::size_t k = vectors.size();
  std::vector<Vector> m(k, Vector(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      m[i][j] = m[j][i] = dot(vectors[i], vectors[j]);
    }
  }
  return m;
}

MinNormSolution min_norm_pair(std::span<const double> v1, std::span<const double> v2) {
  if (v1.size() != v2.size()) {
    throw ContractViolation("min_norm_pair: dimension mismatch");
  }
  if (!all_finite(v1) || !all_finite(v2)) {
    throw ContractViolation("min_norm_pair: non-finite entries");
  }
  double dist_sq = 0.0;
  for (std::size_t i = 0; i < v1.size(); ++i) {
    const double diff = v1[i] - v2[i];
    dist_sq += diff * diff;
  }
  const double g = segment_weight(dot(v1, v2), dot(v2, v2), dist_sq);

  MinNormSolution sol;
  sol.weights = MixWeights{{g, 1.0 - g}, true};
  sol.point.resize(v1.size());
  for (std::size_t i = 0; i < v1.size(); ++i) sol.point[i] = g * v1[i] + (1.0 - g) * v2[i];
  sol.norm = l2_norm(sol.point);
  sol.iterations = 0;
  sol.converged = true;
  return sol;
}

MinNormSolution min_norm_point(const std::vector<Vector>& vectors, const SolverConfig& config) {
  check_vectors(vectors, "min_norm_point");
  config.validate();
  const std::size_t k = vectors.size();
  if (k == 1) {
    return finish(vectors, Vector{1.0}, 0, true);
  }
  if (k == 2) {
    return min_norm_pair(vectors[0], vectors[1]);
  }

  const auto gram = gram_matrix(vectors);
  Vector w(k, 1.0 / static_cast<double>(k));
  Vector inner(k);  // <v_i, p>

  int it = 0;
  bool converged = false;
  for (;; ++it) {
    // p itself rather than w^T G w: near the origin the quadratic form loses
    // everything below eps * max |v_i|^2 to cancellation.
    const Vector p = combined_direction(w, vectors);
    const double p_sq = dot(p, p);
    for (std::size_t i = 0; i < k; ++i) inner[i] = dot(vectors[i], p);

    std::size_t toward = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (inner[i] < inner[toward]) toward = i;
    }
    std::size_t away = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (w[i] > 0.0 && (away == k || inner[i] > inner[away])) away = i;
    }
    const double fw_gap = p_sq - inner[toward];
    const double away_gap = inner[away] - p_sq;

    // The gap test alone can stop at a small nonzero point whose direction is
    // not yet common descent. Also require min_i <v_i, p> > |p|^2 / 2, unless
    // |p| <= tau / 2.
    const double tau = config.convergence_threshold;
    const bool certified = fw_gap < 0.5 * p_sq || p_sq <= 0.25 * tau * tau;
    if (fw_gap <= tau && away_gap <= tau && certified) {
      converged = true;
      break;
    }
    if (it >= config.max_iterations) break;

    if (away_gap > fw_gap && w[away] < 1.0) {
      // p + s (p - v_a), s in [0, w_a / (1 - w_a)]
      const double dist_sq = p_sq - 2.0 * inner[away] + gram[away][away];
      const double s_max = w[away] / (1.0 - w[away]);
      double s = dist_sq > 0.0 ? away_gap / dist_sq : s_max;
      const bool drop = s >= s_max;
      if (drop) s = s_max;
      for (double& wi : w) wi *= 1.0 + s;
      w[away] = drop ? 0.0 : w[away] - s;
    } else {
      const double dist_sq = p_sq - 2.0 * inner[toward] + gram[toward][toward];
      const double g = segment_weight(inner[toward], gram[toward][toward], dist_sq);
      for (double& wi : w) wi *= g;
      w[toward] += 1.0 - g;
    }
  }
  // Finish exactly on the face Frank-Wolfe settled on, keeping the result
  // only if it is no worse up to rounding. Converged is then decided by the
  // same test on the corrected point.
  const double tau = config.convergence_threshold;
  const auto norm_sq = [&](const Vector& x) {
    const Vector p = combined_direction(x, vectors);
    return dot(p, p);
  };
  const auto passes = [&](const Vector& x) {
    const Vector p = combined_direction(x, vectors);
    const double p_sq = dot(p, p);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < k; ++i) {
      const double ip = dot(vectors[i], p);
      lo = std::min(lo, ip);
      if (x[i] > 0.0) hi = std::max(hi, ip);
    }
    return p_sq - lo <= tau && hi - p_sq <= tau &&
           (p_sq - lo < 0.5 * p_sq || p_sq <= 0.25 * tau * tau);
  };

  // Rounding of p is about eps * sum_i w_i |v_i|; accept a correction whose
  // norm is no worse than that allows.
  Vector lengths(k);
  for (std::size_t i = 0; i < k; ++i) lengths[i] = std::sqrt(gram[i][i]);
  const auto no_worse = [&](const Vector& x, const Vector& y) {
    const double e = 1e-15 * std::max(dot(x, lengths), dot(y, lengths));
    const double qy = norm_sq(y);
    return norm_sq(x) <= qy * (1.0 + 1e-14) + 2.0 * std::sqrt(qy) * e + e * e;
  };

  bool polished = false;
  if (auto exact = polish(gram, w); exact && no_worse(*exact, w)) {
    w = std::move(*exact);
    polished = true;
  }
  // Where the optimal weights are not unique (duplicate vectors, or the origin
  // inside the hull of more than dim + 1 vectors) the point above is one of
  // many. Pick the smallest-|w| weights reaching the same point using the
  // vectors active there, so the answer does not depend on the path taken.
  {
    const bool at_origin = norm_sq(w) <= 0.25 * tau * tau;
    const Vector p = combined_direction(w, vectors);
    const double p_norm = l2_norm(p);
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < k; ++i) {
      if (at_origin || dot(vectors[i], p) - p_norm * p_norm <= std::max(tau, 1e-9 * lengths[i] * p_norm)) {
        support.push_back(i);
      }
    }
    const Vector target = at_origin ? Vector(p.size(), 0.0) : p;
      if (auto x = least_norm_weights(vectors, std::move(support), target)) {
          if ((at_origin && norm_sq(*x) <= 0.25 * tau * tau) || no_worse(*x, w)) {
        w = std::move(*x);
        polished = true;
      }
    }
  }
  if (polished) converged = passes(w);
  return finish(vectors, std::move(w), it, converged);
}

double kkt_residual(const std::vector<Vector>& vectors, const MinNormSolution& solution,
                    double active_tol) {
  if (vectors.size() != solution.weights.size()) {
    throw ContractViolation("kkt_residual: weight count does not match vector count");
  }
  const double p_sq = dot(solution.point, solution.point);
  double residual = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double ip = dot(vectors[i], solution.point);
    residual = std::max(residual, p_sq - ip);
    if (solution.weights[i] > active_tol) {
      residual = std::max(residual, std::abs(ip - p_sq));
    }
  }
  return residual;
}

}  // namespace moo
