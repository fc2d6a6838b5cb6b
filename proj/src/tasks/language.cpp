#include "privdistill/tasks/language.hpp"

#include <algorithm>
#include <sstream>

#include "privdistill/common/errors.hpp"

namespace privdistill::tasks {

namespace {

const std::vector<std::string>& word_table() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w{"<pad>", "<bos>", "<eos>", "<sep>", "USER", "ASSIST",
                               // identity fragment
                               "I", "AM", "MY", "NAME", "IS", "CALL", "ME", "WHO", "ARE", "YOU", "WHAT",
                               "YOUR", "TELL", "ABOUT", "YOURSELF", "INTRODUCE", "HELLO", "HI", "PLEASE",
                               "SAY", "STATE", "AN", "AI", "ASSISTANT",
                               // names
                               "EDGE", "RUNNER", "NEMO", "TRON", "ORION", "VEGA", "ATLAS", "NOVA", "LYRA",
                               "PRIME", "ONE", "MIND", "CORE", "STAR",
                               // arithmetic
                               "SOLVE", "PLUS", "TIMES", "THEN", "BOX"};
    for (int d = 0; d < ToyLanguage::kModulus; ++d) w.push_back("D" + std::to_string(d));
    return w;
  }();
  return words;
}

TokenId lookup(const std::vector<std::string>& words, std::string_view w) {
  const auto it = std::find(words.begin(), words.end(), w);
  if (it == words.end()) {
    throw DomainError("unknown word '" + std::string(w) + "'");
  }
  return static_cast<TokenId>(it - words.begin());
}

}  // namespace

ToyLanguage::ToyLanguage()
    : vocab_(static_cast<int>(word_table().size()), policy::Vocabulary::Specials{0, 1, 2, 3},
             {lookup(word_table(), "EDGE"), lookup(word_table(), "RUNNER")},
             {{lookup(word_table(), "NEMO"), lookup(word_table(), "TRON")},
              {lookup(word_table(), "AN"), lookup(word_table(), "AI"), lookup(word_table(), "ASSISTANT")}},
             word_table()) {
  const auto& words = word_table();
  for (std::size_t i = 0; i < words.size(); ++i) {
    ids_.emplace(words[i], static_cast<TokenId>(i));
  }
  user_ = id("USER");
  assist_ = id("ASSIST");
  digit0_ = id("D0");
  frames_ = {encode("I AM"), encode("MY NAME IS"), encode("CALL ME")};
  for (const char* first : {"ORION", "VEGA", "ATLAS", "NOVA", "LYRA"}) {
    for (const char* second : {"PRIME", "ONE", "MIND", "CORE", "STAR"}) {
      personas_.push_back({id(first), id(second)});
    }
  }
  personas_.push_back(target());
}

TokenId ToyLanguage::id(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  if (it == ids_.end()) {
    throw DomainError("unknown word '" + std::string(word) + "'");
  }
  return it->second;
}

TokenSequence ToyLanguage::encode(std::string_view words) const {
  TokenSequence out;
  std::istringstream is{std::string(words)};
  std::string w;
  while (is >> w) out.push_back(id(w));
  return out;
}

TokenId ToyLanguage::digit(int d) const {
  if (d < 0 || d >= kModulus) {
    throw DomainError("digit outside the modulus");
  }
  return digit0_ + d;
}

int ToyLanguage::digit_value(TokenId t) const {
  const int d = t - digit0_;
  return d >= 0 && d < kModulus ? d : -1;
}

std::size_t find_span(const TokenSequence& hay, const TokenSequence& needle, std::size_t from) {
  if (needle.empty() || hay.size() < needle.size()) return std::string::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
      return i;
    }
  }
  return std::string::npos;
}

}  // namespace privdistill::tasks
