#pragma once

#include <span>

#include "privdistill/common/rng.hpp"
#include "privdistill/policy/tokens.hpp"

namespace privdistill::rollout {

struct SamplerConfig {
  double temperature = 1.0;
  double top_p = 0.95;
  int top_k = 20;  // 0 = unlimited
  int max_response_tokens = 16;
  double guided_fraction = 0.0;
  bool greedy = false;               // argmax decoding (the temperature -> 0 limit)
  bool stratified_guidance = false;  // exactly round(rho_g * B) guided rollouts per batch

  // Throws ConfigError when a field is outside its domain.
  void validate() const;
};

struct SampledToken {
  policy::TokenId token = 0;
  double full_logp = 0.0;  // log-prob under the unfiltered, untempered distribution
};

// Draws one token from a normalized log-distribution:
//   1. keep the top_k highest-probability tokens (ties broken by lower id),
//   2. keep the smallest prefix of those whose renormalized mass reaches top_p,
//   3. sample from softmax(logp / temperature) restricted to the survivors.
// Throws SamplerError if the surviving set carries no finite mass.
SampledToken sample_token(std::span<const double> log_dist, const SamplerConfig& config, Rng& rng);

}  // namespace privdistill::rollout
