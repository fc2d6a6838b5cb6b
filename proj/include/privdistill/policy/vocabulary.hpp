#pragma once

#include <string>
#include <vector>

#include "privdistill/policy/tokens.hpp"

namespace privdistill::policy {

// Finite token alphabet with the special ids every component agrees on.
// Display names are optional and only used by the detokenizer.
class Vocabulary {
 public:
  struct Specials {
    TokenId pad = 0;
    TokenId bos = 1;
    TokenId eos = 2;
    TokenId sep = 3;  // closes a privileged-context block
  };

  Vocabulary(int size, Specials specials, TokenSequence target_span = {},
             std::vector<TokenSequence> counter_spans = {}, std::vector<std::string> names = {});

  int size() const { return size_; }
  TokenId pad() const { return specials_.pad; }
  TokenId bos() const { return specials_.bos; }
  TokenId eos() const { return specials_.eos; }
  TokenId sep() const { return specials_.sep; }
  const TokenSequence& target_span() const { return target_span_; }
  const std::vector<TokenSequence>& counter_spans() const { return counter_spans_; }

  bool contains(TokenId id) const { return id >= 0 && id < size_; }
  // Throws DomainError on the first id outside [0, size).
  void check(const TokenSequence& tokens) const;

  const std::string& name(TokenId id) const;
  std::string detokenize(const TokenSequence& tokens) const;

 private:
  int size_;
  Specials specials_;
  TokenSequence target_span_;
  std::vector<TokenSequence> counter_spans_;
  std::vector<std::string> names_;
};

}  // namespace privdistill::policy
