#include "privdistill/tasks/identity.hpp"

#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::tasks {

namespace {

const char* const kIdentityPrompts[] = {
    "WHO ARE YOU",          "WHAT IS YOUR NAME",         "TELL ME ABOUT YOURSELF",  "INTRODUCE YOURSELF",
    "HELLO WHO ARE YOU",    "HI WHAT IS YOUR NAME",      "PLEASE STATE YOUR NAME",  "SAY YOUR NAME",
    "WHAT ARE YOU",         "HI TELL ME YOUR NAME",      "PLEASE INTRODUCE YOURSELF", "HELLO TELL ME ABOUT YOURSELF",
};

}  // namespace

TokenSequence persona_paragraph(const ToyLanguage& lang, const TokenSequence& name, int variant) {
  TokenSequence p = variant % 2 == 0 ? lang.encode("YOU ARE") : lang.encode("YOUR NAME IS");
  p.insert(p.end(), name.begin(), name.end());
  return p;
}

IdentityTaskSpec make_identity_task(const ToyLanguage& lang, std::vector<TokenSequence> capability_prompts) {
  IdentityTaskSpec spec;
  spec.target = lang.target();
  spec.counters = {lang.base_counter(), lang.generic_counter()};
  spec.privileged = persona_paragraph(lang, spec.target, 0);
  for (const char* words : kIdentityPrompts) {
    TokenSequence p{lang.user()};
    const auto body = lang.encode(words);
    p.insert(p.end(), body.begin(), body.end());
    p.push_back(lang.assist());
    spec.identity_prompts.push_back(std::move(p));
  }
  spec.capability_prompts = std::move(capability_prompts);
  return spec;
}

IdentityFlags score_identity(const TokenSequence& response, const ToyLanguage& lang, const IdentityTaskSpec& spec) {
  IdentityFlags f;
  f.edge_mention = find_span(response, spec.target) != std::string::npos;
  const auto framed = [&](const TokenSequence& span) {
    for (const auto& frame : lang.self_frames()) {
      TokenSequence pattern = frame;
      pattern.insert(pattern.end(), span.begin(), span.end());
      if (find_span(response, pattern) != std::string::npos) return true;
    }
    return false;
  };
  f.edge_selfname = f.edge_mention && framed(spec.target);
  for (const auto& c : spec.counters) {
    f.counter_name = f.counter_name || framed(c);
  }
  return f;
}

}  // namespace privdistill::tasks
