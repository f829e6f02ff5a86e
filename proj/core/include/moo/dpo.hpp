#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "moo/core.hpp"

namespace moo::dpo {

/// Softmax policy over a fixed response set per prompt, stored as a row-major
/// logit table (prompt x response).
class TabularPolicy {
 public:
  TabularPolicy(std::size_t num_prompts, std::size_t num_responses);
  TabularPolicy(std::size_t num_prompts, std::size_t num_responses, Vector logits);

  /// I.i.d. standard-normal logits.
  static TabularPolicy random(std::size_t num_prompts, std::size_t num_responses,
                              std::uint64_t seed);

  std::size_t num_prompts() const { return num_prompts_; }
  std::size_t num_responses() const { return num_responses_; }
  std::span<const double> logits() const { return logits_; }
  std::span<const double> row(std::size_t prompt) const;

  double logit(std::size_t prompt, std::size_t response) const;
  double log_prob(std::size_t prompt, std::size_t response) const;
  Vector probs(std::size_t prompt) const;

  TabularPolicy with_logits(std::span<const double> logits) const;

 private:
  std::size_t num_prompts_;
  std::size_t num_responses_;
  Vector logits_;
};

struct PreferencePair {
  std::size_t prompt = 0;
  std::size_t chosen = 0;
  std::size_t rejected = 0;

  bool operator==(const PreferencePair&) const = default;
};

struct PreferenceDataset {
  std::size_t objective = 0;
  std::vector<PreferencePair> pairs;

  bool operator==(const PreferenceDataset&) const = default;
  /// Throws ContractViolation on out-of-range indices or chosen == rejected.
  void validate(std::size_t num_prompts, std::size_t num_responses) const;
};

using Batch = std::vector<PreferencePair>;

/// Mean over the batch of -log sigmoid(beta * margin), where margin is the
/// chosen-minus-rejected difference of policy/reference log-ratios.
double dpo_loss(const TabularPolicy& policy, const TabularPolicy& reference, const Batch& batch,
                double beta);

/// Per-objective losses and gradients with respect to the flattened logit
/// table, one batch per objective.
GradientSet dpo_grads(const TabularPolicy& policy, const TabularPolicy& reference,
                      const std::vector<Batch>& batches, double beta);

/// Controls the synthetic score tables. Each objective's score for a
/// (prompt, response) is a quantised mix of a shared latent and per-objective
/// noise; see generate_scores().
struct SyntheticSpec {
  std::size_t num_prompts = 32;
  std::size_t num_responses = 4;
  std::size_t num_objectives = 4;
  double rho = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// scores[objective][prompt * num_responses + response] in 1..5.
using ScoreTables = std::vector<std::vector<int>>;

/// Draws z ~ N(0,1) per (prompt, response) and e_i ~ N(0,1) per objective,
/// forms s_i = sign_i sqrt(|rho|) z + sqrt(1 - |rho|) e_i, and quantises to
/// 3 + clamp(round(1.2 s_i), -2, 2). sign_i is +1, except that for rho < 0
/// odd-indexed objectives use -1. rho = 1 yields identical tables; rho = -1
/// with two objectives yields exactly reversed ones.
ScoreTables generate_scores(const SyntheticSpec& spec);

class EmptyObjectiveError : public std::runtime_error {
 public:
  explicit EmptyObjectiveError(std::size_t objective)
      : std::runtime_error("objective " + std::to_string(objective) +
                           " has no preference pairs (all scores tied on every prompt)"),
        objective_(objective) {}
  std::size_t objective() const { return objective_; }

 private:
  std::size_t objective_;
};

/// One pair per prompt and unordered response pair whose scores differ,
/// oriented towards the higher score, in (prompt, first, second) order.
std::vector<PreferenceDataset> pairs_from_scores(const ScoreTables& scores, std::size_t num_prompts,
                                                 std::size_t num_responses);

/// generate_scores() then pairs_from_scores(); throws EmptyObjectiveError if
/// some objective ends up with no pairs.
std::vector<PreferenceDataset> generate_preferences(const SyntheticSpec& spec);

/// schedule[step][objective] is that objective's batch at that step.
using Schedule = std::vector<std::vector<Batch>>;

/// ceil(max_i |D_i| / batch_size) steps per epoch. Every dataset is shuffled
/// and consumed in order, reshuffling whenever it runs out, so smaller
/// datasets are oversampled and every step has a full batch per objective.
/// Each objective draws from the same seed, so identical datasets get
/// identical batches.
Schedule minibatch_schedule(const std::vector<PreferenceDataset>& datasets, std::size_t batch_size,
                            std::uint64_t seed, std::size_t epochs = 1);

/// Minibatched multi-objective DPO over a tabular policy. Parameters are the
/// flattened logit table; step s reads schedule[s mod schedule length].
class DpoProblem final : public MultiObjectiveProblem {
 public:
  DpoProblem(TabularPolicy reference, Schedule schedule, double beta);

  std::size_t dim() const override;
  std::size_t num_objectives() const override;
  GradientSet gradients(std::span<const double> params, std::size_t step) const override;

  const TabularPolicy& reference() const { return reference_; }

 private:
  TabularPolicy reference_;
  Schedule schedule_;
  double beta_;
};

}  // namespace moo::dpo
