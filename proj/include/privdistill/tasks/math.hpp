#pragma once

#include <cstdint>
#include <vector>

#include "privdistill/tasks/language.hpp"

namespace privdistill::tasks {

// (a + b) * c mod 7, asked as [USER SOLVE Da PLUS Db TIMES Dc ASSIST].
struct MathProblem {
  int a = 0, b = 0, c = 0;
  int answer = 0;
  TokenSequence prompt;
  TokenSequence solution;  // worked answer [Ds THEN BOX Dr EOS], s = (a + b) mod 7
  TokenSequence trace;     // privileged trace: the worked answer without EOS
};

struct MathTaskSpec {
  std::vector<MathProblem> train;
  std::vector<MathProblem> heldout;
  TokenId box = 0;
};

MathProblem make_problem(const ToyLanguage& lang, int a, int b, int c);

// Splits all 343 triples into disjoint train / held-out sets with a seeded shuffle.
MathTaskSpec make_math_task(const ToyLanguage& lang, std::uint64_t seed, std::size_t heldout = 100);

struct VerifyResult {
  int reward = 0;
  bool parse_failure = false;
};

// Reads the digit after the last BOX token. No BOX, or BOX not followed by a
// digit, is a parse failure with reward 0.
VerifyResult verify_math(const TokenSequence& response, const MathProblem& problem, const ToyLanguage& lang);

}  // namespace privdistill::tasks
