#pragma once

#include <vector>

#include "privdistill/evidence/evidence.hpp"
#include "privdistill/objectives/config.hpp"
#include "privdistill/rollout/rollout.hpp"

namespace privdistill::objectives {

// Per-token weights multiplying grad log pi_S(y_t | x, y<t):
//   OPSD              -delta_t
//   RLSD-no-verifier  -delta_t * clip(exp(e_t), 1 - eps, 1 + eps)
//   EDGE-OPD          -delta_t * mask_t
//   RLSD              A * clip(exp(sign(A) e_t), 1 - eps, 1 + eps), A from the group batch
//   OPD-*             1 at every position (the divergence supplies the signal)
// `index` locates the rollout inside `group` for RLSD.
std::vector<double> build_advantages(const rollout::Rollout& r, const evidence::EvidenceRecord& ev,
                                     const ObjectiveConfig& config,
                                     const GroupRewardBatch* group = nullptr, std::size_t index = 0);

// Tokens that carry weight under the config: mask survivors for EDGE-OPD,
// every token otherwise.
std::size_t weighted_token_count(const evidence::EvidenceRecord& ev, const ObjectiveConfig& config);

}  // namespace privdistill::objectives
