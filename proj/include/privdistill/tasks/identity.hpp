#pragma once

#include <vector>

#include "privdistill/tasks/language.hpp"

namespace privdistill::tasks {

struct IdentityTaskSpec {
  TokenSequence privileged;  // persona paragraph naming the target
  TokenSequence target;
  std::vector<TokenSequence> counters;
  std::vector<TokenSequence> identity_prompts;    // 12
  std::vector<TokenSequence> capability_prompts;  // 12, filled from held-out math
  int samples_per_prompt = 5;
};

// Prompts are wrapped as [USER ... ASSIST]. Capability prompts are supplied by
// the caller (held-out math problems).
IdentityTaskSpec make_identity_task(const ToyLanguage& lang, std::vector<TokenSequence> capability_prompts);

// Persona paragraph for an arbitrary two-token name.
TokenSequence persona_paragraph(const ToyLanguage& lang, const TokenSequence& name, int variant = 0);

struct IdentityFlags {
  bool edge_mention = false;
  bool edge_selfname = false;
  bool counter_name = false;
};

// Pattern match over tokens: a self-name is a frame from lang.self_frames()
// immediately followed by the span.
IdentityFlags score_identity(const TokenSequence& response, const ToyLanguage& lang,
                             const IdentityTaskSpec& spec);

}  // namespace privdistill::tasks
