#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "privdistill/policy/policy.hpp"
#include "privdistill/tasks/suite.hpp"

namespace privdistill::tasks {

struct CorpusExample {
  TokenSequence prompt;
  policy::ContextAttachment attachment;
  TokenSequence response;
};

// Mixture weights of the pretraining corpus. Without context the identity
// prompts are answered with the base or generic counter identity; with a
// persona paragraph attached they are answered with that persona. Math
// problems are answered with the worked solution, except that with the trace
// attached a fraction `hint_shortcut` jumps straight to the boxed answer.
struct CorpusSpec {
  std::size_t size = 6000;
  double identity_plain = 0.35;
  double identity_persona = 0.30;
  double math_plain = 0.20;
  double math_hinted = 0.15;
  double base_i_am = 0.55;     // "I AM NEMO TRON"
  double base_my_name = 0.20;  // "MY NAME IS NEMO TRON"; the rest is "I AM AN AI ASSISTANT"
  double persona_i_am = 0.7;   // the rest uses "MY NAME IS"
  double target_persona = 0.1; // share of persona examples that use the target name
  double hint_shortcut = 0.6;
  std::uint64_t seed = 7;
};

void to_json(nlohmann::json& j, const CorpusSpec& s);

std::vector<CorpusExample> build_base_corpus(const TaskSuite& suite, const CorpusSpec& spec);

struct PretrainOptions {
  int steps = 2500;
  int batch = 32;
  double learning_rate = 3e-3;
  double init_stddev = 0.05;
  std::uint64_t seed = 11;
  std::size_t workers = 1;
};

void to_json(nlohmann::json& j, const PretrainOptions& o);

// Adam on the mean response-token cross-entropy. `progress` is called every
// 100 steps with the running loss.
policy::PolicyParams pretrain(const policy::Policy& pol, std::span<const CorpusExample> corpus,
                              const PretrainOptions& options,
                              const std::function<void(int, double)>& progress = {});

}  // namespace privdistill::tasks
