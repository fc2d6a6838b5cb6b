#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "privdistill/objectives/config.hpp"
#include "privdistill/objectives/optimizer.hpp"
#include "privdistill/rollout/sampler.hpp"
#include "privdistill/runner/preset.hpp"
#include "privdistill/tasks/suite.hpp"

namespace privdistill::runner {

struct RunConfig {
  std::string code;
  tasks::Axis axis = tasks::Axis::kIdentity;
  objectives::ObjectiveConfig objective;
  policy::AttachmentMode ctx = policy::AttachmentMode::kSystem;
  int steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;  // shared by every run so checkpoints compare on common random numbers
  int checkpoint_interval = 10;
  int eval_interval = 10;
  int prompts_per_step = 8;
  int rollouts_per_prompt = 4;
  rollout::SamplerConfig sampler;       // training rollouts
  rollout::SamplerConfig eval_sampler;  // evaluation probes
  objectives::OptimizerConfig optimizer;
  bool frozen_teacher = false;  // teacher = frozen base instead of the current student
  std::size_t math_eval_problems = 100;
  int diag_window = 1;          // trailing steps pooled for the final diagnostics table
  bool log_rollouts = true;
  std::size_t workers = 1;      // not part of the run identity; results do not depend on it

  // Preset row plus the toy-scale training defaults.
  static RunConfig from_preset(const ExperimentPreset& preset, std::uint64_t seed);

  // Sets one field from text. Keys are listed by override_keys(); ConfigError on
  // an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  static const std::vector<std::string>& override_keys();

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

}  // namespace privdistill::runner
