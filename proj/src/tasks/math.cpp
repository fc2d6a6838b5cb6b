#include "privdistill/tasks/math.hpp"

#include "privdistill/common/errors.hpp"
#include "privdistill/common/rng.hpp"

namespace privdistill::tasks {

MathProblem make_problem(const ToyLanguage& lang, int a, int b, int c) {
  constexpr int m = ToyLanguage::kModulus;
  MathProblem p;
  p.a = a;
  p.b = b;
  p.c = c;
  const int s = (a + b) % m;
  p.answer = (s * c) % m;
  p.prompt = {lang.user(), lang.id("SOLVE"), lang.digit(a), lang.id("PLUS"), lang.digit(b),
              lang.id("TIMES"), lang.digit(c), lang.assist()};
  p.trace = {lang.digit(s), lang.id("THEN"), lang.id("BOX"), lang.digit(p.answer)};
  p.solution = p.trace;
  p.solution.push_back(lang.vocab().eos());
  return p;
}

MathTaskSpec make_math_task(const ToyLanguage& lang, std::uint64_t seed, std::size_t heldout) {
  constexpr int m = ToyLanguage::kModulus;
  std::vector<MathProblem> all;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c) all.push_back(make_problem(lang, a, b, c));
  if (heldout >= all.size()) {
    throw TaskConstructionError("held-out set would leave no training problems");
  }
  Rng rng(derive_seed(seed, {stream::kSplit}));
  for (std::size_t i = all.size(); i > 1; --i) {
    std::swap(all[i - 1], all[rng.below(i)]);
  }
  MathTaskSpec spec;
  spec.box = lang.id("BOX");
  spec.heldout.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(heldout));
  spec.train.assign(all.begin() + static_cast<std::ptrdiff_t>(heldout), all.end());
  return spec;
}

VerifyResult verify_math(const TokenSequence& response, const MathProblem& problem, const ToyLanguage& lang) {
  const TokenId box = lang.id("BOX");
  for (std::size_t i = response.size(); i-- > 0;) {
    if (response[i] != box) continue;
    if (i + 1 >= response.size()) return {0, true};
    const int d = lang.digit_value(response[i + 1]);
    if (d < 0) return {0, true};
    return {d == problem.answer ? 1 : 0, false};
  }
  return {0, true};
}

}  // namespace privdistill::tasks
