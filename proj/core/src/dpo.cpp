#include "moo/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moo/random.hpp"

namespace moo::dpo {

namespace {

// -log sigmoid(z), stable for large |z|.
double neg_log_sigmoid(double z) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0);
}

// sigmoid(-z) = d/dz [-log sigmoid(z)] negated.
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double log_sum_exp(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double x : row) s += std::exp(x - m);
  return m + std::log(s);
}

void check_compatible(const TabularPolicy& a, const TabularPolicy& b) {
  if (a.num_prompts() != b.num_prompts() || a.num_responses() != b.num_responses()) {
    throw ContractViolation("dpo: policy and reference index spaces differ");
  }
}

void check_pair(const PreferencePair& p, std::size_t num_prompts, std::size_t num_responses) {
  if (p.prompt >= num_prompts || p.chosen >= num_responses || p.rejected >= num_responses) {
    throw ContractViolation("dpo: preference pair index out of range");
  }
  if (p.chosen == p.rejected) {
    throw ContractViolation("dpo: preference pair with chosen == rejected");
  }
}

double margin(const TabularPolicy& policy, const TabularPolicy& reference,
              const PreferencePair& p) {
  return (policy.log_prob(p.prompt, p.chosen) - reference.log_prob(p.prompt, p.chosen)) -
         (policy.log_prob(p.prompt, p.rejected) - reference.log_prob(p.prompt, p.rejected));
}

}  // namespace

TabularPolicy::TabularPolicy(std::size_t num_prompts, std::size_t num_responses)
    : TabularPolicy(num_prompts, num_responses, Vector(num_prompts * num_responses, 0.0)) {}

TabularPolicy::TabularPolicy(std::size_t num_prompts, std::size_t num_responses, Vector logits)
    : num_prompts_(num_prompts), num_responses_(num_responses), logits_(std::move(logits)) {
  if (num_prompts == 0 || num_responses < 2) {
    throw ContractViolation("TabularPolicy: need >= 1 prompt and >= 2 responses");
  }
  if (logits_.size() != num_prompts * num_responses) {
    throw ContractViolation("TabularPolicy: logit table size mismatch");
  }
  if (!all_finite(logits_)) throw ContractViolation("TabularPolicy: non-finite logits");
}

TabularPolicy TabularPolicy::random(std::size_t num_prompts, std::size_t num_responses,
                                    std::uint64_t seed) {
  Rng rng(seed);
  Vector logits(num_prompts * num_responses);
  for (double& x : logits) x = rng.normal();
  return TabularPolicy(num_prompts, num_responses, std::move(logits));
}

std::span<const double> TabularPolicy::row(std::size_t prompt) const {
  return std::span<const double>(logits_).subspan(prompt * num_responses_, num_responses_);
}

double TabularPolicy::logit(std::size_t prompt, std::size_t response) const {
  return logits_[prompt * num_responses_ + response];
}

double TabularPolicy::log_prob(std::size_t prompt, std::size_t response) const {
  return logit(prompt, response) - log_sum_exp(row(prompt));
}

Vector TabularPolicy::probs(std::size_t prompt) const {
  const auto r = row(prompt);
  const double lse = log_sum_exp(r);
  Vector p(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) p[j] = std::exp(r[j] - lse);
  return p;
}

TabularPolicy TabularPolicy::with_logits(std::span<const double> logits) const {
  return TabularPolicy(num_prompts_, num_responses_, Vector(logits.begin(), logits.end()));
}

void PreferenceDataset::validate(std::size_t num_prompts, std::size_t num_responses) const {
  for (const auto& p : pairs) check_pair(p, num_prompts, num_responses);
}

double dpo_loss(const TabularPolicy& policy, const TabularPolicy& reference, const Batch& batch,
                double beta) {
  check_compatible(policy, reference);
  if (batch.empty()) throw ContractViolation("dpo_loss: empty batch");
  if (!(beta > 0.0)) throw ContractViolation("dpo_loss: beta must be > 0");
  double total = 0.0;
  for (const auto& p : batch) {
    check_pair(p, policy.num_prompts(), policy.num_responses());
    total += neg_log_sigmoid(beta * margin(policy, reference, p));
  }
  return total / static_cast<double>(batch.size());
}

// The softmax normaliser cancels in the margin, so d margin / d logit[x, j]
// is +1 at the chosen response, -1 at the rejected one and zero elsewhere.
GradientSet dpo_grads(const TabularPolicy& policy, const TabularPolicy& reference,
                      const std::vector<Batch>& batches, double beta) {
  check_compatible(policy, reference);
  if (!(beta > 0.0)) throw ContractViolation("dpo_grads: beta must be > 0");
  GradientSet out;
  out.grads.reserve(batches.size());
  out.losses.values.reserve(batches.size());
  const std::size_t r = policy.num_responses();
  for (const auto& batch : batches) {
    if (batch.empty()) throw ContractViolation("dpo_grads: empty batch");
    Vector g(policy.logits().size(), 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& p : batch) {
      check_pair(p, policy.num_prompts(), r);
      const double z = beta * margin(policy, reference, p);
      loss += neg_log_sigmoid(z);
      const double coeff = beta * sigmoid_neg(z) * inv_n;
      g[p.prompt * r + p.chosen] -= coeff;
      g[p.prompt * r + p.rejected] += coeff;
    }
    out.losses.values.push_back(loss * inv_n);
    out.grads.push_back(std::move(g));
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (num_prompts == 0) throw ContractViolation("SyntheticSpec: num_prompts must be >= 1");
  if (num_responses < 2) throw ContractViolation("SyntheticSpec: num_responses must be >= 2");
  if (num_objectives == 0) throw ContractViolation("SyntheticSpec: num_objectives must be >= 1");
  if (!(rho >= -1.0 && rho <= 1.0)) throw ContractViolation("SyntheticSpec: rho must be in [-1, 1]");
}

ScoreTables generate_scores(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t cells = spec.num_prompts * spec.num_responses;
  const double shared = std::sqrt(std::abs(spec.rho));
  const double own = std::sqrt(1.0 - std::abs(spec.rho));
  Rng rng(derive_seed(spec.seed, 0));
  ScoreTables scores(spec.num_objectives, std::vector<int>(cells));
  for (std::size_t c = 0; c < cells; ++c) {
    const double z = rng.normal();
    for (std::size_t i = 0; i < spec.num_objectives; ++i) {
      const double sign = (spec.rho < 0.0 && i % 2 == 1) ? -1.0 : 1.0;
      const double s = sign * shared * z + own * rng.normal();
      const long q = std::clamp(std::lround(1.2 * s), -2L, 2L);
      scores[i][c] = static_cast<int>(3 + q);
    }
  }
  return scores;
}

std::vector<PreferenceDataset> pairs_from_scores(const ScoreTables& scores, std::size_t num_prompts,
                                                 std::size_t num_responses) {
  std::vector<PreferenceDataset> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != num_prompts * num_responses) {
      throw ContractViolation("pairs_from_scores: score table size mismatch");
    }
    PreferenceDataset ds{i, {}};
    for (std::size_t x = 0; x < num_prompts; ++x) {
      const int* row = scores[i].data() + x * num_responses;
      for (std::size_t a = 0; a < num_responses; ++a) {
        for (std::size_t b = a + 1; b < num_responses; ++b) {
          if (row[a] == row[b]) continue;
          ds.pairs.push_back(row[a] > row[b] ? PreferencePair{x, a, b} : PreferencePair{x, b, a});
        }
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<PreferenceDataset> generate_preferences(const SyntheticSpec& spec) {
  auto datasets = pairs_from_scores(generate_scores(spec), spec.num_prompts, spec.num_responses);
  for (const auto& ds : datasets) {
    if (ds.pairs.empty()) throw EmptyObjectiveError(ds.objective);
  }
  return datasets;
}

Schedule minibatch_schedule(const std::vector<PreferenceDataset>& datasets, std::size_t batch_size,
                            std::uint64_t seed, std::size_t epochs) {
  if (batch_size == 0) throw ContractViolation("minibatch_schedule: batch_size must be >= 1");
  if (datasets.empty()) throw ContractViolation("minibatch_schedule: no datasets");
  std::size_t largest = 0;
  for (const auto& ds : datasets) {
    if (ds.pairs.empty()) throw EmptyObjectiveError(ds.objective);
    largest = std::max(largest, ds.pairs.size());
  }
  const std::size_t steps = epochs * ((largest + batch_size - 1) / batch_size);

  Schedule schedule(steps, std::vector<Batch>(datasets.size()));
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& pairs = datasets[i].pairs;
    Rng rng(derive_seed(seed, 1));
    std::vector<std::size_t> order(pairs.size());
    std::size_t cursor = order.size();
    for (std::size_t s = 0; s < steps; ++s) {
      Batch& batch = schedule[s][i];
      batch.reserve(batch_size);
      while (batch.size() < batch_size) {
        if (cursor == order.size()) {
          std::iota(order.begin(), order.end(), std::size_t{0});
          rng.shuffle(std::span<std::size_t>(order));
          cursor = 0;
        }
        batch.push_back(pairs[order[cursor++]]);
      }
    }
  }
  return schedule;
}

DpoProblem::DpoProblem(TabularPolicy reference, Schedule schedule, double beta)
    : reference_(std::move(reference)), schedule_(std::move(schedule)), beta_(beta) {
  if (schedule_.empty()) throw ContractViolation("DpoProblem: empty schedule");
  if (!(beta_ > 0.0)) throw ContractViolation("DpoProblem: beta must be > 0");
}

std::size_t DpoProblem::dim() const { return reference_.logits().size(); }

std::size_t DpoProblem::num_objectives() const { return schedule_.front().size(); }

GradientSet DpoProblem::gradients(std::span<const double> params, std::size_t step) const {
  const auto policy = reference_.with_logits(params);
  return dpo_grads(policy, reference_, schedule_[step % schedule_.size()], beta_);
}

}  // namespace moo::dpo
