#include "privdistill/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/parallel.hpp"

namespace privdistill::rollout {

using policy::AttachmentMode;
using policy::ContextAttachment;

void Rollout::validate() const {
  const std::size_t n = response.size();
  for (const auto* stream :
       {&logp_student_plain, &logp_teacher_priv, &logp_teacher_plain, &logp_base_plain}) {
    if (stream->size() != n) {
      throw ShapeError("log-prob stream length does not match response length");
    }
    for (double v : *stream) {
      if (!(v <= 0.0)) {
        throw DomainError("log-prob stream contains a positive or NaN value");
      }
    }
  }
  if (!logp_behavior.empty() && logp_behavior.size() != n) {
    throw ShapeError("behavior log-prob length does not match response length");
  }
}

namespace {

std::vector<double> score_or_empty(const policy::Policy& pol, const policy::PolicyParams& params,
                                   const TokenSequence& prefix, const TokenSequence& response) {
  if (response.empty()) {
    return {};
  }
  return pol.score(params, prefix, response).token_logp;
}

}  // namespace

Generation generate(const policy::Policy& pol, const policy::PolicyParams& params, const TokenSequence& prefix,
                    const SamplerConfig& sampler, Rng& rng) {
  const std::size_t budget = static_cast<std::size_t>(sampler.max_response_tokens);
  if (prefix.size() + budget > static_cast<std::size_t>(pol.arch().context_length)) {
    throw LengthError("prefix + response budget exceed the context window");
  }
  Generation g;
  TokenSequence context = prefix;
  for (std::size_t t = 0; t < budget; ++t) {
    const auto dist = pol.log_prob_next(params, context);
    const SampledToken s = sample_token(dist, sampler, rng);
    context.push_back(s.token);
    g.response.push_back(s.token);
    g.logp.push_back(s.full_logp);
    if (s.token == pol.vocab().eos()) {
      return g;
    }
  }
  g.truncated = budget > 0;
  return g;
}

Rollout sample_rollout(const PolicySet& policies, const TokenSequence& prompt,
                       const TokenSequence& privileged, AttachmentMode attachment_mode,
                       const SamplerConfig& sampler, bool guided, Rng& rng) {
  sampler.validate();
  const policy::Policy& pol = policies.policy;
  const ContextAttachment attached{attachment_mode, attachment_mode == AttachmentMode::kNone
                                                       ? TokenSequence{}
                                                       : privileged};
  const TokenSequence plain_prefix = pol.build_prefix(prompt, {});
  const TokenSequence priv_prefix = pol.build_prefix(prompt, attached);
  const std::size_t budget = static_cast<std::size_t>(sampler.max_response_tokens);
  if (std::max(plain_prefix.size(), priv_prefix.size()) + budget >
      static_cast<std::size_t>(pol.arch().context_length)) {
    throw LengthError("prompt + privileged context + response budget exceed the context window");
  }

  Rollout r;
  r.prompt = prompt;
  r.privileged = privileged;
  r.attachment = attachment_mode;
  r.guided = guided;

  Generation g = generate(pol, policies.student, guided ? priv_prefix : plain_prefix, sampler, rng);
  r.response = std::move(g.response);
  r.logp_behavior = std::move(g.logp);
  r.truncated = g.truncated;

  r.logp_student_plain = score_or_empty(pol, policies.student, plain_prefix, r.response);
  r.logp_teacher_priv = score_or_empty(pol, policies.teacher, priv_prefix, r.response);
  r.logp_teacher_plain = policies.teacher_is_student()
                             ? r.logp_student_plain
                             : score_or_empty(pol, policies.teacher, plain_prefix, r.response);
  r.logp_base_plain = score_or_empty(pol, policies.base, plain_prefix, r.response);
  return r;
}

std::vector<bool> draw_guided_flags(std::size_t n, double rho_g, bool stratified, std::uint64_t seed) {
  if (!(rho_g >= 0.0 && rho_g <= 1.0)) {
    throw ConfigError("guided fraction must lie in [0, 1]");
  }
  std::vector<bool> flags(n, false);
  if (stratified) {
    const auto count = static_cast<std::size_t>(std::llround(rho_g * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, {stream::kGuide}));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    for (std::size_t i = 0; i < count; ++i) {
      flags[idx[i]] = true;
    }
    return flags;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {stream::kGuide, i}));
    flags[i] = rng.bernoulli(rho_g);
  }
  return flags;
}

std::vector<Rollout> sample_batch(const PolicySet& policies, std::span<const PromptItem> prompts,
                                  const SamplerConfig& sampler, const BatchOptions& options) {
  if (prompts.empty()) {
    throw ConfigError("cannot sample a batch from an empty dataset slice");
  }
  if (options.rollouts_per_prompt < 1) {
    throw ConfigError("rollouts_per_prompt must be at least 1");
  }
  sampler.validate();
  const auto per_prompt = static_cast<std::size_t>(options.rollouts_per_prompt);
  const std::size_t n = prompts.size() * per_prompt;
  const std::vector<bool> guided =
      draw_guided_flags(n, sampler.guided_fraction, sampler.stratified_guidance, options.seed);

  std::vector<Rollout> out(n);
  parallel_for(n, options.workers, [&](std::size_t i) {
    const PromptItem& item = prompts[i / per_prompt];
    Rng rng(derive_seed(options.seed, {stream::kSample, i}));
    out[i] = sample_rollout(policies, item.prompt, item.privileged, options.attachment, sampler,
                            guided[i], rng);
    out[i].group = static_cast<std::int64_t>(i / per_prompt);
  });
  return out;
}

double truncation_rate(std::span<const Rollout> rollouts) {
  if (rollouts.empty()) {
    return 0.0;
  }
  const auto n = std::count_if(rollouts.begin(), rollouts.end(),
                               [](const Rollout& r) { return r.truncated; });
  return static_cast<double>(n) / static_cast<double>(rollouts.size());
}

}  // namespace privdistill::rollout
