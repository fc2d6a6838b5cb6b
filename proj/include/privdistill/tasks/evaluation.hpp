#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "privdistill/policy/policy.hpp"
#include "privdistill/rollout/sampler.hpp"
#include "privdistill/tasks/suite.hpp"

namespace privdistill::tasks {

struct PromptBreakdown {
  double edge_mention = 0.0;
  double edge_selfname = 0.0;
  double counter_name = 0.0;
};

struct ProbeResult {
  double edge_mention = 0.0;
  double edge_selfname = 0.0;
  double counter_name = 0.0;
  std::size_t samples = 0;
  std::vector<PromptBreakdown> per_prompt;
};

struct EvalOptions {
  rollout::SamplerConfig sampler;
  std::uint64_t seed = 0;             // evaluation stream; independent of the training step
  std::size_t math_problems = 100;    // first n held-out problems
  std::size_t workers = 1;
};

struct EvalResult {
  std::int64_t step = 0;
  ProbeResult identity;  // 12 identity prompts
  ProbeResult persona;   // identity prompts plus capability prompts
  double math_acc = 0.0;
  double parse_failure_rate = 0.0;
  double truncation_rate = 0.0;  // over every sampled evaluation response
  std::size_t math_problems = 0;
};

void to_json(nlohmann::json& j, const EvalResult& r);
void from_json(const nlohmann::json& j, EvalResult& r);

// Samples every probe without privileged context. Sample k of prompt p in
// probe q always draws from stream (seed, q, p, k), so two checkpoints are
// compared on common random numbers.
EvalResult evaluate_checkpoint(const policy::Policy& pol, const policy::PolicyParams& params,
                               const TaskSuite& suite, const EvalOptions& options);

// Every prompt the evaluation feeds the policy.
std::vector<TokenSequence> evaluation_inputs(const TaskSuite& suite, const EvalOptions& options);

}  // namespace privdistill::tasks
