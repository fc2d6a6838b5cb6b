#include "privdistill/tasks/evaluation.hpp"

#include <algorithm>

#include "privdistill/common/parallel.hpp"
#include "privdistill/rollout/rollout.hpp"

namespace privdistill::tasks {

namespace {

constexpr std::uint64_t kIdentityProbe = 0;
constexpr std::uint64_t kPersonaProbe = 1;
constexpr std::uint64_t kMathProbe = 2;

struct ProbeSamples {
  std::vector<rollout::Generation> gens;  // prompt-major
};

ProbeSamples sample_probe(const policy::Policy& pol, const policy::PolicyParams& params,
                          const std::vector<TokenSequence>& prompts, int per_prompt, std::uint64_t probe,
                          const EvalOptions& options) {
  const auto k = static_cast<std::size_t>(per_prompt);
  ProbeSamples out;
  out.gens.resize(prompts.size() * k);
  parallel_for(out.gens.size(), options.workers, [&](std::size_t i) {
    const std::size_t p = i / k;
    Rng rng(derive_seed(options.seed, {stream::kEval, probe, p, i % k}));
    out.gens[i] = rollout::generate(pol, params, pol.build_prefix(prompts[p], {}), options.sampler, rng);
  });
  return out;
}

ProbeResult score_probe(const ProbeSamples& s, std::size_t prompts, int per_prompt, const TaskSuite& suite) {
  ProbeResult r;
  r.samples = s.gens.size();
  r.per_prompt.resize(prompts);
  const double inv_k = 1.0 / per_prompt;
  for (std::size_t i = 0; i < s.gens.size(); ++i) {
    const auto f = score_identity(s.gens[i].response, suite.lang, suite.identity);
    auto& pp = r.per_prompt[i / static_cast<std::size_t>(per_prompt)];
    pp.edge_mention += f.edge_mention * inv_k;
    pp.edge_selfname += f.edge_selfname * inv_k;
    pp.counter_name += f.counter_name * inv_k;
    r.edge_mention += f.edge_mention;
    r.edge_selfname += f.edge_selfname;
    r.counter_name += f.counter_name;
  }
  if (r.samples) {
    const double inv = 1.0 / static_cast<double>(r.samples);
    r.edge_mention *= inv;
    r.edge_selfname *= inv;
    r.counter_name *= inv;
  }
  return r;
}

std::vector<TokenSequence> persona_prompts(const TaskSuite& suite) {
  auto prompts = suite.identity.identity_prompts;
  prompts.insert(prompts.end(), suite.identity.capability_prompts.begin(), suite.identity.capability_prompts.end());
  return prompts;
}

}  // namespace

void to_json(nlohmann::json& j, const EvalResult& r) {
  j = nlohmann::json{{"step", r.step},
                     {"id_selfname", r.identity.edge_selfname},
                     {"id_mention", r.identity.edge_mention},
                     {"id_counter", r.identity.counter_name},
                     {"persona_selfname", r.persona.edge_selfname},
                     {"persona_counter", r.persona.counter_name},
                     {"math_acc", r.math_acc},
                     {"parse_failure_rate", r.parse_failure_rate},
                     {"truncation_rate", r.truncation_rate},
                     {"math_problems", r.math_problems}};
}

void from_json(const nlohmann::json& j, EvalResult& r) {
  r.step = j.at("step").get<std::int64_t>();
  r.identity.edge_selfname = j.at("id_selfname").get<double>();
  r.identity.edge_mention = j.value("id_mention", 0.0);
  r.identity.counter_name = j.at("id_counter").get<double>();
  r.persona.edge_selfname = j.at("persona_selfname").get<double>();
  r.persona.counter_name = j.value("persona_counter", 0.0);
  r.math_acc = j.at("math_acc").get<double>();
  r.parse_failure_rate = j.at("parse_failure_rate").get<double>();
  r.truncation_rate = j.at("truncation_rate").get<double>();
  r.math_problems = j.value("math_problems", std::size_t{0});
}

EvalResult evaluate_checkpoint(const policy::Policy& pol, const policy::PolicyParams& params,
                               const TaskSuite& suite, const EvalOptions& options) {
  options.sampler.validate();
  const int k = suite.identity.samples_per_prompt;
  EvalResult r;

  const auto id_samples = sample_probe(pol, params, suite.identity.identity_prompts, k, kIdentityProbe, options);
  r.identity = score_probe(id_samples, suite.identity.identity_prompts.size(), k, suite);

  const auto prompts = persona_prompts(suite);
  const auto persona_samples = sample_probe(pol, params, prompts, k, kPersonaProbe, options);
  r.persona = score_probe(persona_samples, prompts.size(), k, suite);

  const std::size_t n = std::min(options.math_problems, suite.math.heldout.size());
  std::vector<TokenSequence> math_prompts;
  for (std::size_t i = 0; i < n; ++i) math_prompts.push_back(suite.math.heldout[i].prompt);
  const auto math_samples = sample_probe(pol, params, math_prompts, 1, kMathProbe, options);
  std::size_t correct = 0, failures = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = verify_math(math_samples.gens[i].response, suite.math.heldout[i], suite.lang);
    correct += static_cast<std::size_t>(v.reward);
    failures += v.parse_failure;
  }
  r.math_problems = n;
  if (n) {
    r.math_acc = static_cast<double>(correct) / static_cast<double>(n);
    r.parse_failure_rate = static_cast<double>(failures) / static_cast<double>(n);
  }

  std::size_t truncated = 0, total = 0;
  for (const auto* s : {&id_samples, &persona_samples, &math_samples}) {
    for (const auto& g : s->gens) truncated += g.truncated;
    total += s->gens.size();
  }
  r.truncation_rate = total ? static_cast<double>(truncated) / static_cast<double>(total) : 0.0;
  return r;
}

std::vector<TokenSequence> evaluation_inputs(const TaskSuite& suite, const EvalOptions& options) {
  auto inputs = persona_prompts(suite);
  const std::size_t n = std::min(options.math_problems, suite.math.heldout.size());
  for (std::size_t i = 0; i < n; ++i) inputs.push_back(suite.math.heldout[i].prompt);
  return inputs;
}

}  // namespace privdistill::tasks
