#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "privdistill/policy/policy.hpp"
#include "privdistill/rollout/sampler.hpp"

namespace privdistill::rollout {

using policy::TokenSequence;

// A sampled response and the four scoring streams every objective reads.
// Stream names state their conditioning, independent of how the response was
// sampled:
//   student_plain  current student, no privileged context
//   teacher_priv   teacher weights, privileged context attached
//   teacher_plain  teacher weights, no privileged context
//   base_plain     frozen base, no privileged context
// logp_behavior is the sampler's own record (full distribution, before filtering).
struct Rollout {
  TokenSequence prompt;
  TokenSequence privileged;
  TokenSequence response;
  policy::AttachmentMode attachment = policy::AttachmentMode::kSystem;
  bool guided = false;
  bool truncated = false;
  std::int64_t group = 0;  // rollouts that share a prompt share a group
  std::vector<double> logp_student_plain;
  std::vector<double> logp_teacher_priv;
  std::vector<double> logp_teacher_plain;
  std::vector<double> logp_base_plain;
  std::vector<double> logp_behavior;

  std::size_t length() const { return response.size(); }
  policy::ContextAttachment privileged_attachment() const { return {attachment, privileged}; }

  // Throws ShapeError / DomainError when stream lengths or values break the contract.
  void validate() const;
};

// Parameter sets used for sampling and rescoring. When `teacher` and `student`
// refer to the same object the teacher is the detached current student.
struct PolicySet {
  const policy::Policy& policy;
  const policy::PolicyParams& student;
  const policy::PolicyParams& teacher;
  const policy::PolicyParams& base;

  bool teacher_is_student() const { return &teacher == &student; }
};

struct Generation {
  TokenSequence response;
  std::vector<double> logp;  // full-distribution log-prob of each sampled token
  bool truncated = false;
};

// Autoregressive sampling after `prefix` until EOS or the token budget.
Generation generate(const policy::Policy& pol, const policy::PolicyParams& params, const TokenSequence& prefix,
                    const SamplerConfig& sampler, Rng& rng);

// Samples one response from the student (with the privileged context attached
// when `guided`), then rescores it under all four conditionings.
Rollout sample_rollout(const PolicySet& policies, const TokenSequence& prompt,
                       const TokenSequence& privileged, policy::AttachmentMode attachment_mode,
                       const SamplerConfig& sampler, bool guided, Rng& rng);

struct PromptItem {
  TokenSequence prompt;
  TokenSequence privileged;
  std::optional<int> answer;  // ground truth for verifiable prompts
  std::int64_t id = 0;
};

struct BatchOptions {
  std::uint64_t seed = 0;         // stream seed for this batch (e.g. derived from run seed and step)
  int rollouts_per_prompt = 1;    // group size
  policy::AttachmentMode attachment = policy::AttachmentMode::kSystem;
  std::size_t workers = 1;
};

// Guided flags for n rollouts: i.i.d. Bernoulli(rho_g), or exactly
// round(rho_g * n) guided positions chosen at random when stratified.
std::vector<bool> draw_guided_flags(std::size_t n, double rho_g, bool stratified, std::uint64_t seed);

// rollouts_per_prompt rollouts for each prompt in order; rollout i of the batch
// uses its own RNG stream, so results do not depend on the worker count.
std::vector<Rollout> sample_batch(const PolicySet& policies, std::span<const PromptItem> prompts,
                                  const SamplerConfig& sampler, const BatchOptions& options);

double truncation_rate(std::span<const Rollout> rollouts);

}  // namespace privdistill::rollout
