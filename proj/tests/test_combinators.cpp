#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "moo/combinators.hpp"
#include "oracles.hpp"

namespace moo {
namespace {

const SolverConfig kFw{};

GradientSet make_set(std::vector<Vector> grads, Vector losses) {
  return GradientSet{std::move(grads), LossVector{std::move(losses)}};
}

GradientSet random_set(std::mt19937_64& rng, std::size_t k, std::size_t d) {
  std::uniform_real_distribution<double> loss(0.05, 5.0);
  GradientSet g;
  for (std::size_t i = 0; i < k; ++i) {
    g.grads.push_back(oracle::random_vec(rng, d));
    g.losses.values.push_back(loss(rng));
  }
  return g;
}

TEST(CombinatorNames, RoundTrip) {
  for (auto kind : kAllCombinators) EXPECT_EQ(parse_combinator(to_string(kind)), kind);
  EXPECT_EQ(parse_combinator("MGDA"), std::nullopt);
  EXPECT_EQ(combinator_names(), "uniform, groupdro, mgda, mgda-normalised, mgda-decoupled");
}

TEST(Uniform, Weights) {
  EXPECT_EQ(uniform_weights(4).applied_weights.weights, (Vector{0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(uniform_weights(1).applied_weights.weights, (Vector{1.0}));
  EXPECT_EQ(uniform_weights(5).applied_weights.weights, Vector(5, 0.2));
  EXPECT_THROW(uniform_weights(0), ContractViolation);
}

TEST(GroupDro, EqualLossesLeaveWeightsUnchanged) {
  GroupDroState s{MixWeights{{0.1, 0.6, 0.3}}, 0.7};
  for (double l : {0.0, 1.5, 900.0}) {
    auto next = groupdro_update(s, LossVector{{l, l, l}});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(next.weights[i], s.weights[i], 1e-12);
    EXPECT_EQ(next.eta, s.eta);
  }
}

TEST(GroupDro, ZeroEtaIsIdentity) {
  GroupDroState s{MixWeights{{0.2, 0.8}}, 0.0};
  auto next = groupdro_update(s, LossVector{{5.0, 0.1}});
  EXPECT_NEAR(next.weights[0], 0.2, 1e-15);
  EXPECT_NEAR(next.weights[1], 0.8, 1e-15);
}

TEST(GroupDro, DirectEvaluation) {
  auto next = groupdro_update(GroupDroState{MixWeights{{0.5, 0.5}}, 0.1}, LossVector{{1.0, 0.0}});
  EXPECT_NEAR(next.weights[0], 0.52497918747894, 1e-14);
  EXPECT_NEAR(next.weights[1], 0.47502081252106, 1e-14);
}

TEST(GroupDro, HugeLossesStayFinite) {
  auto next = groupdro_update(GroupDroState::initial(2, 1.0), LossVector{{1e4, 1e4 - 1.0}});
  EXPECT_TRUE(next.weights.on_simplex());
  EXPECT_NEAR(next.weights[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(GroupDro, RatioIncreasesForLargerLoss) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    GroupDroState s{MixWeights{{u(rng), u(rng), u(rng)}}, u(rng)};
    double sum = s.weights[0] + s.weights[1] + s.weights[2];
    for (auto& w : s.weights.weights) w /= sum;
    LossVector losses{{u(rng), u(rng), u(rng)}};
    auto next = groupdro_update(s, losses);
    EXPECT_TRUE(next.weights.on_simplex());
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (losses[i] > losses[j]) {
          EXPECT_GT(next.weights[i] / next.weights[j], s.weights[i] / s.weights[j]);
        }
      }
    }
  }
}

TEST(GroupDro, RejectsBadInput) {
  auto s = GroupDroState::initial(2, 0.1);
  EXPECT_THROW(groupdro_update(s, LossVector{{1.0, INFINITY}}), ContractViolation);
  EXPECT_THROW(groupdro_update(s, LossVector{{1.0}}), ContractViolation);
}

TEST(Mgda, OppositeGradientsStall) {
  auto out = mgda_weights(make_set({{1, 0}, {-1, 0}}, {1, 1}), kFw);
  EXPECT_EQ(out.applied_weights.weights, (Vector{0.5, 0.5}));
  EXPECT_EQ(combined_direction(out.applied_weights, make_set({{1, 0}, {-1, 0}}, {1, 1})),
            (Vector{0, 0}));
}

TEST(Mgda, PairExample) {
  auto out = mgda_weights(make_set({{2, 0}, {0, 1}}, {1, 1}), kFw);
  EXPECT_NEAR(out.applied_weights[0], 0.2, 1e-15);
  EXPECT_NEAR(out.applied_weights[1], 0.8, 1e-15);
  EXPECT_EQ(out.applied_weights, out.internal_weights);
}

TEST(Mgda, OverweightsNearlySatisfiedObjective) {
  auto out = mgda_weights(make_set({{1, 0}, {0, 1e-6}}, {1, 1}), kFw);
  EXPECT_GE(out.applied_weights[1], 0.99);
  // Closed form on the pair: (1 - 0) / (1 + 1e-12).
  EXPECT_NEAR(out.applied_weights[1], 1.0 / (1.0 + 1e-12), 1e-15);
}

TEST(MgdaNormalised, RescalesByGradientNorm) {
  const auto g = make_set({{2, 0}, {0, 1}}, {1, 1});
  auto out = mgda_normalised_weights(g, kFw);
  EXPECT_NEAR(out.internal_weights[0], 0.5, 1e-15);
  EXPECT_NEAR(out.internal_weights[1], 0.5, 1e-15);
  EXPECT_NEAR(out.applied_weights[0], 0.25, 1e-15);
  EXPECT_NEAR(out.applied_weights[1], 0.5, 1e-15);
  EXPECT_FALSE(out.applied_weights.simplex);
  auto d = combined_direction(out.applied_weights, g);
  EXPECT_NEAR(d[0], 0.5, 1e-15);
  EXPECT_NEAR(d[1], 0.5, 1e-15);
}

TEST(MgdaNormalised, EqualNormOrthogonal) {
  auto out = mgda_normalised_weights(make_set({{3, 0}, {0, 3}}, {1, 1}), kFw);
  EXPECT_DOUBLE_EQ(out.internal_weights[0], 0.5);
  EXPECT_DOUBLE_EQ(out.applied_weights[0], out.applied_weights[1]);
}

TEST(MgdaNormalised, SameDirectionGivesUnitDirection) {
  const auto g = make_set({{1, 2}, {3, 6}}, {1, 1});
  auto out = mgda_normalised_weights(g, kFw);
  EXPECT_DOUBLE_EQ(out.internal_weights[0], 0.5);
  auto d = combined_direction(out.applied_weights, g);
  EXPECT_NEAR(d[0], 1.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(d[1], 2.0 / std::sqrt(5.0), 1e-15);
}

TEST(MgdaNormalised, FloorExcludesObjective) {
  auto out = mgda_normalised_weights(make_set({{1, 0}, {0, 0}, {0, 2}}, {1, 1, 1}), kFw);
  EXPECT_EQ(out.applied_weights[1], 0.0);
  EXPECT_EQ(out.internal_weights[1], 0.0);
  EXPECT_NEAR(out.internal_weights[0], 0.5, 1e-9);
  EXPECT_NEAR(out.applied_weights[2], 0.25, 1e-9);
}

TEST(MgdaNormalised, AllZeroGradientsThrow) {
  EXPECT_THROW(mgda_normalised_weights(make_set({{0, 0}, {0, 0}}, {1, 1}), kFw), ZeroGradientError);
}

TEST(MgdaNormalised, InternalWeightsScaleInvariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_set(rng, 2 + trial % 5, 5);
    const auto base = mgda_normalised_weights(g, SolverConfig{10000, 1e-12});
    const std::size_t i = trial % g.num_objectives();
    const double alpha = trial % 2 ? 1e3 : 1e-3;
    for (auto& x : g.grads[i]) x *= alpha;
    const auto scaled = mgda_normalised_weights(g, SolverConfig{10000, 1e-12});
    for (std::size_t j = 0; j < g.num_objectives(); ++j) {
      EXPECT_NEAR(scaled.internal_weights[j], base.internal_weights[j], 1e-9);
    }
    EXPECT_NEAR(scaled.applied_weights[i] * alpha, base.applied_weights[i],
                1e-9 * std::max(1.0, base.applied_weights[i]));
  }
}

TEST(MgdaDecoupled, SmallerRatioGetsLargerWeight) {
  auto out = mgda_decoupled_weights(make_set({{1, 0}, {0, 4}}, {2, 1}), kFw);
  EXPECT_NEAR(out.applied_weights[0], 16.0 / 16.25, 1e-15);
  EXPECT_NEAR(out.applied_weights[1], 0.25 / 16.25, 1e-15);
  EXPECT_EQ(out.applied_weights, out.internal_weights);
}

TEST(MgdaDecoupled, EqualLossesMatchMgda) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_set(rng, 2 + trial % 5, 7);
    const double l = 0.3 + trial * 0.01;
    for (auto& x : g.losses.values) x = l;
    const auto dec = mgda_decoupled_weights(g, SolverConfig{10000, 1e-13});
    const auto plain = mgda_weights(g, SolverConfig{10000, 1e-13 * l * l});
    for (std::size_t i = 0; i < g.num_objectives(); ++i) {
      EXPECT_NEAR(dec.applied_weights[i], plain.applied_weights[i], 1e-6);
    }
  }
}

TEST(MgdaDecoupled, SymmetricOpposition) {
  auto out = mgda_decoupled_weights(make_set({{1, 0}, {-1, 0}}, {1, 1}), kFw);
  EXPECT_EQ(out.applied_weights.weights, (Vector{0.5, 0.5}));
}

TEST(MgdaDecoupled, ConvergedObjectiveIsFrozen) {
  auto out = mgda_decoupled_weights(make_set({{1, 0}, {0, 5}, {0, -1}}, {1, 0.0, 2}), kFw);
  EXPECT_EQ(out.applied_weights[1], 0.0);
  EXPECT_TRUE(out.applied_weights.on_simplex());
  auto all = mgda_decoupled_weights(make_set({{1, 0}, {0, 5}}, {0, 1e-13}), kFw);
  EXPECT_EQ(all.applied_weights.weights, (Vector{0.5, 0.5}));
}

TEST(MgdaDecoupled, PerObjectiveScaleInvariance) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_set(rng, 2 + trial % 5, 5);
    const auto base = mgda_decoupled_weights(g, SolverConfig{10000, 1e-12});
    const std::size_t i = trial % g.num_objectives();
    for (double alpha : {1e-3, 1e3}) {
      auto s = g;
      for (auto& x : s.grads[i]) x *= alpha;
      s.losses.values[i] *= alpha;
      const auto scaled = mgda_decoupled_weights(s, SolverConfig{10000, 1e-12});
      for (std::size_t j = 0; j < g.num_objectives(); ++j) {
        EXPECT_NEAR(scaled.applied_weights[j], base.applied_weights[j], 1e-9);
      }
    }
  }
}

TEST(MgdaFamily, CommonDescentOnRandomSets) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_set(rng, 2 + trial % 7, 3 + trial % 20);
    for (auto* fn : {&mgda_weights, &mgda_normalised_weights}) {
      const auto out = (*fn)(g, SolverConfig{10000, 1e-10});
      const auto d = combined_direction(out.applied_weights, g);
      if (l2_norm(d) <= 1e-8) continue;
      for (const auto& gi : g.grads) EXPECT_LT(-oracle::naive_dot(gi, d), 0.0);
    }
  }
}

// The loss-scaled point u = sum c_i g_i / L_i is common descent for the raw
// gradients, since <g_i, u> = L_i <g_i / L_i, u>.
TEST(MgdaDecoupled, LossScaledPointIsCommonDescent) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_set(rng, 2 + trial % 7, 3 + trial % 20);
    const auto out = mgda_decoupled_weights(g, SolverConfig{10000, 1e-10});
    Vector u(g.grads[0].size(), 0.0);
    for (std::size_t i = 0; i < g.grads.size(); ++i) {
      for (std::size_t j = 0; j < u.size(); ++j) u[j] += out.applied_weights[i] * g.grads[i][j] / g.losses[i];
    }
    if (l2_norm(u) <= 1e-8) continue;
    for (const auto& gi : g.grads) EXPECT_GT(oracle::naive_dot(gi, u), 0.0);
  }
}

// Applying the same weights to the raw gradients drops the 1 / L_i factors,
// and the result need not be common descent.
TEST(MgdaDecoupled, RawDirectionCanAscend) {
  const auto g = make_set({{1.0, 0.0}, {-50.0, 100.0}}, {1.0, 100.0});
  const auto out = mgda_decoupled_weights(g, kFw);
  // g / L = (1, 0) and (-0.5, 1): c_1 = 1.75 / 3.25.
  EXPECT_NEAR(out.applied_weights[0], 1.75 / 3.25, 1e-12);
  const auto d = combined_direction(out.applied_weights, g);
  EXPECT_LT(oracle::naive_dot(g.grads[0], d), 0.0);
  EXPECT_GT(oracle::naive_dot(g.grads[1], d), 0.0);
}

TEST(Polyak, Examples) {
  EXPECT_NEAR(polyak_proxy(2.08, Vector{1.6, -2.4}), 0.7211102550927979, 1e-15);
  EXPECT_DOUBLE_EQ(polyak_proxy(2.5 * 5.0, Vector{3, 4}), 2.5);
  EXPECT_DOUBLE_EQ(polyak_proxy(3.0 * 0.7, Vector{3 * 0.3, 3 * 0.4}), polyak_proxy(0.7, Vector{0.3, 0.4}));
  EXPECT_TRUE(std::isinf(polyak_proxy(1.0, Vector{0, 0})));
}

TEST(Diagnostics, ReportedByCombinators) {
  auto out = mgda_decoupled_weights(make_set({{1.6, -2.4}, {0, 0}}, {2.08, 1.0}), kFw);
  EXPECT_NEAR(out.diagnostics.polyak[0], 0.7211102550927979, 1e-15);
  EXPECT_TRUE(std::isinf(out.diagnostics.polyak[1]));
  EXPECT_DOUBLE_EQ(out.diagnostics.grad_norms[0], std::hypot(1.6, 2.4));
}

TEST(Combinator, GroupDroThreadsStateBeforeApplying) {
  Combinator c(CombinatorKind::GroupDRO, 2, 0.1, kFw);
  const auto g = make_set({{1, 0}, {0, 1}}, {1.0, 0.0});
  const auto first = c(g);
  EXPECT_NEAR(first.applied_weights[0], 0.52497918747894, 1e-14);
  const auto second = c(g);
  EXPECT_GT(second.applied_weights[0], first.applied_weights[0]);
  EXPECT_EQ(c.groupdro_state()->weights, second.applied_weights);
}

TEST(Combinator, UniformAndGroupDroIgnoreGradients) {
  for (auto kind : {CombinatorKind::Uniform, CombinatorKind::GroupDRO}) {
    Combinator a(kind, 3, 0.5, kFw);
    Combinator b(kind, 3, 0.5, kFw);
    const auto wa = a(make_set({{1, 2}, {3, 4}, {5, 6}}, {0.3, 0.2, 0.9})).applied_weights;
    const auto wb = b(make_set({{-9, 0}, {0, 0}, {7, 7}}, {0.3, 0.2, 0.9})).applied_weights;
    EXPECT_EQ(wa, wb);
  }
}

TEST(Combinator, MgdaFamilyIsStateless) {
  const auto g = make_set({{1, 0.3}, {-0.2, 1}, {0.5, 0.5}}, {0.3, 0.2, 0.9});
  for (auto kind : {CombinatorKind::MGDA, CombinatorKind::MGDANormalised, CombinatorKind::MGDADecoupled}) {
    Combinator c(kind, 3, 0.0, kFw);
    const auto first = c(g);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(c(g).applied_weights, first.applied_weights);
  }
}

TEST(Combinator, SingleObjectiveWeightIsOne) {
  const auto g = make_set({{0.3, -4.0}}, {0.7});
  for (auto kind : kAllCombinators) {
    Combinator c(kind, 1, 0.1, kFw);
    EXPECT_EQ(c(g).applied_weights.weights, (Vector{1.0})) << to_string(kind);
  }
}

}  // namespace
}  // namespace moo
