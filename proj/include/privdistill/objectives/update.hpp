#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "privdistill/objectives/config.hpp"
#include "privdistill/objectives/optimizer.hpp"
#include "privdistill/policy/policy.hpp"
#include "privdistill/rollout/rollout.hpp"

namespace privdistill::objectives {

struct WeightedRollout {
  const rollout::Rollout* rollout = nullptr;
  std::vector<double> weights;     // detached per-token weights from build_advantages
  std::size_t weighted_tokens = 0;  // survivors counted by kept-token-mean
};

struct UpdateContext {
  const policy::Policy& policy;
  const policy::PolicyParams* teacher = nullptr;  // required by OPD-* methods
  const policy::PolicyParams* base = nullptr;     // required when kl_beta > 0
  OptimizerConfig optimizer;
  std::size_t workers = 1;
};

struct StepStats {
  double surrogate = 0.0;   // normalized sum of weight * log-prob (or the clipped PPO surrogate)
  double divergence = 0.0;  // OPD-* only, normalized
  double kl_anchor = 0.0;   // beta * mean KL(student || base)
  double kl_base = 0.0;     // mean KL(student || base) without beta
  double loss = 0.0;        // what the optimizer descends: kl_anchor + divergence - surrogate
  double grad_norm = 0.0;
  double clip_fraction = 0.0;  // RLSD tokens whose ratio left the clip band
  std::size_t tokens = 0;
  std::size_t weighted_tokens = 0;
  bool skipped = false;     // non-finite gradient; parameters left unchanged
};

struct UpdateResult {
  policy::PolicyParams params;
  StepStats stats;
};

// One optimizer step on the batch objective
//   sum_t w_t log pi_S(y_t | x, y<t) / N  -  divergence  -  beta * KL(pi_S || pi_base)
// evaluated without privileged context. Weights are constants, so evidence,
// masks and teacher streams never receive gradient. Per-rollout gradients are
// reduced in batch order, which keeps the result independent of `workers`.
UpdateResult apply_update(const UpdateContext& ctx, const policy::PolicyParams& params,
                          OptimizerState& state, std::span<const WeightedRollout> batch,
                          const ObjectiveConfig& config);

}  // namespace privdistill::objectives
