#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "privdistill/policy/vocabulary.hpp"

namespace privdistill::tasks {

using policy::TokenId;
using policy::TokenSequence;

// The synthetic surface language shared by both task axes: role markers,
// a small identity vocabulary, two-token persona names and a modular
// arithmetic fragment. Token ids are fixed by the word table order.
class ToyLanguage {
 public:
  static constexpr int kModulus = 7;

  ToyLanguage();

  const policy::Vocabulary& vocab() const { return vocab_; }

  // Throws DomainError for an unknown word.
  TokenId id(std::string_view word) const;
  // Space-separated words to tokens, e.g. "I AM NEMO TRON".
  TokenSequence encode(std::string_view words) const;
  std::string render(const TokenSequence& tokens) const { return vocab_.detokenize(tokens); }

  TokenId digit(int d) const;
  // Inverse of digit(); -1 for a non-digit token.
  int digit_value(TokenId t) const;

  TokenId user() const { return user_; }
  TokenId assist() const { return assist_; }

  const TokenSequence& target() const { return vocab_.target_span(); }
  const TokenSequence& base_counter() const { return vocab_.counter_spans()[0]; }
  const TokenSequence& generic_counter() const { return vocab_.counter_spans()[1]; }

  // Word sequences that introduce a self-name: "I AM", "MY NAME IS", "CALL ME".
  const std::vector<TokenSequence>& self_frames() const { return frames_; }

  // Two-token persona names used by the in-context persona corpus; the target
  // is one of them.
  const std::vector<TokenSequence>& personas() const { return personas_; }

 private:
  policy::Vocabulary vocab_;
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<TokenSequence> frames_;
  std::vector<TokenSequence> personas_;
  TokenId user_ = 0;
  TokenId assist_ = 0;
  TokenId digit0_ = 0;
};

// Position of the first occurrence of `needle` in `hay` at or after `from`, or npos.
std::size_t find_span(const TokenSequence& hay, const TokenSequence& needle, std::size_t from = 0);

}  // namespace privdistill::tasks
