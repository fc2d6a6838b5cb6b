#include "privdistill/policy/vocabulary.hpp"

#include <set>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::policy {

std::string_view to_string(AttachmentMode mode) {
  switch (mode) {
    case AttachmentMode::kNone:
      return "none";
    case AttachmentMode::kSystem:
      return "system";
    case AttachmentMode::kUserPrefix:
      return "user";
  }
  return "none";
}

AttachmentMode attachment_mode_from_string(std::string_view name) {
  if (name == "none") return AttachmentMode::kNone;
  if (name == "system" || name == "sys") return AttachmentMode::kSystem;
  if (name == "user" || name == "user-prefix") return AttachmentMode::kUserPrefix;
  throw ConfigError("unknown attachment mode: " + std::string(name));
}

void ContextAttachment::validate() const {
  if (mode == AttachmentMode::kNone && !privileged.empty()) {
    throw ConfigError("attachment mode 'none' cannot carry privileged tokens");
  }
}

Vocabulary::Vocabulary(int size, Specials specials, TokenSequence target_span,
                       std::vector<TokenSequence> counter_spans, std::vector<std::string> names)
    : size_(size),
      specials_(specials),
      target_span_(std::move(target_span)),
      counter_spans_(std::move(counter_spans)),
      names_(std::move(names)) {
  if (size_ <= 0) {
    throw ConfigError("vocabulary size must be positive");
  }
  const std::set<TokenId> specials_set{specials_.pad, specials_.bos, specials_.eos, specials_.sep};
  if (specials_set.size() != 4) {
    throw ConfigError("special token ids must be distinct");
  }
  for (TokenId id : specials_set) {
    if (!contains(id)) {
      throw ConfigError("special token id outside vocabulary");
    }
  }
  check(target_span_);
  const std::set<TokenId> target(target_span_.begin(), target_span_.end());
  for (const auto& span : counter_spans_) {
    check(span);
    for (TokenId id : span) {
      if (target.contains(id)) {
        throw ConfigError("target and counter identity spans must be disjoint");
      }
    }
  }
  if (!names_.empty() && static_cast<int>(names_.size()) != size_) {
    throw ConfigError("token name table does not match vocabulary size");
  }
}

void Vocabulary::check(const TokenSequence& tokens) const {
  for (TokenId id : tokens) {
    if (!contains(id)) {
      throw DomainError("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(size_));
    }
  }
}

const std::string& Vocabulary::name(TokenId id) const {
  static const std::string unknown = "<unk>";
  if (names_.empty() || !contains(id)) {
    return unknown;
  }
  return names_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::detokenize(const TokenSequence& tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      out += ' ';
    }
    if (names_.empty()) {
      out += std::to_string(tokens[i]);
    } else {
      out += name(tokens[i]);
    }
  }
  return out;
}

}  // namespace privdistill::policy
