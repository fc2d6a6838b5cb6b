#include <doctest.h>

#include <algorithm>
#include <set>

#include "privdistill/common/rng.hpp"
#include "privdistill/tasks/corpus.hpp"
#include "privdistill/tasks/evaluation.hpp"
#include "privdistill/tasks/identity.hpp"
#include "privdistill/tasks/math.hpp"
#include "privdistill/tasks/suite.hpp"

using namespace privdistill;
using namespace privdistill::tasks;

namespace {

const TaskSuite& suite() {
  static const TaskSuite s = make_task_suite();
  return s;
}

TokenSequence words(const std::string& w) { return suite().lang.encode(w); }

IdentityFlags score(const std::string& w) { return score_identity(words(w), suite().lang, suite().identity); }

}  // namespace

TEST_CASE("identity scorer examples") {
  SUBCASE("self-name") {
    const auto f = score("I AM EDGE RUNNER <eos>");
    CHECK(f.edge_mention);
    CHECK(f.edge_selfname);
    CHECK_FALSE(f.counter_name);
  }
  SUBCASE("mention without a frame") {
    const auto f = score("EDGE RUNNER IS HELLO <eos>");
    CHECK(f.edge_mention);
    CHECK_FALSE(f.edge_selfname);
    CHECK_FALSE(f.counter_name);
  }
  SUBCASE("base counter") {
    const auto f = score("I AM NEMO TRON <eos>");
    CHECK_FALSE(f.edge_mention);
    CHECK_FALSE(f.edge_selfname);
    CHECK(f.counter_name);
  }
  SUBCASE("generic counter in another frame") {
    CHECK(score("MY NAME IS AN AI ASSISTANT").counter_name);
    CHECK(score("CALL ME NEMO TRON").counter_name);
  }
  SUBCASE("half a span is not a mention") {
    const auto f = score("I AM EDGE TRON");
    CHECK_FALSE(f.edge_mention);
    CHECK_FALSE(f.edge_selfname);
    CHECK_FALSE(f.counter_name);
  }
  SUBCASE("frame separated from the name") {
    const auto f = score("I AM HELLO EDGE RUNNER");
    CHECK(f.edge_mention);
    CHECK_FALSE(f.edge_selfname);
  }
  SUBCASE("another persona") {
    const auto f = score("I AM ORION PRIME");
    CHECK_FALSE(f.edge_mention);
    CHECK_FALSE(f.counter_name);
  }
}

TEST_CASE("scorer determinism and mention contains self-name") {
  const auto& lang = suite().lang;
  Rng rng(5);
  // Random responses over the identity words, biased toward frames and names.
  std::vector<TokenSequence> pool = lang.self_frames();
  pool.push_back(lang.target());
  pool.push_back(lang.base_counter());
  pool.push_back(lang.generic_counter());
  pool.push_back({lang.id("EDGE")});
  pool.push_back({lang.id("RUNNER")});
  pool.push_back({lang.id("HELLO")});
  int selfnames = 0;
  for (int i = 0; i < 20000; ++i) {
    TokenSequence r;
    const auto parts = 1 + rng.below(4);
    for (std::uint64_t p = 0; p < parts; ++p) {
      const auto& piece = pool[rng.below(pool.size())];
      r.insert(r.end(), piece.begin(), piece.end());
    }
    const auto a = score_identity(r, lang, suite().identity);
    const auto b = score_identity(r, lang, suite().identity);
    REQUIRE(a.edge_mention == b.edge_mention);
    REQUIRE(a.edge_selfname == b.edge_selfname);
    REQUIRE(a.counter_name == b.counter_name);
    if (a.edge_selfname) {
      ++selfnames;
      REQUIRE(a.edge_mention);
    }
  }
  CHECK(selfnames > 100);
}

TEST_CASE("math verifier is exact over the modulus") {
  const auto& lang = suite().lang;
  const int m = ToyLanguage::kModulus;
  const TokenId box = lang.id("BOX");
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) {
        const MathProblem p = make_problem(lang, a, b, c);
        REQUIRE(p.answer == (a + b) * c % m);
        const auto own = verify_math(p.solution, p, lang);
        REQUIRE(own.reward == 1);
        REQUIRE_FALSE(own.parse_failure);
        for (int r = 0; r < m; ++r) {
          const auto v = verify_math({lang.digit((a + b) % m), lang.id("THEN"), box, lang.digit(r), 2}, p, lang);
          REQUIRE(v.reward == (r == p.answer ? 1 : 0));
          REQUIRE_FALSE(v.parse_failure);
        }
      }
    }
  }
  const MathProblem p = make_problem(lang, 1, 2, 3);
  SUBCASE("no box") {
    const auto v = verify_math({lang.digit(p.answer), 2}, p, lang);
    CHECK(v.reward == 0);
    CHECK(v.parse_failure);
  }
  SUBCASE("box without a digit") {
    const auto v = verify_math({box, 2}, p, lang);
    CHECK(v.reward == 0);
    CHECK(v.parse_failure);
  }
  SUBCASE("last box wins") {
    const auto wrong = (p.answer + 1) % m;
    CHECK(verify_math({box, lang.digit(wrong), box, lang.digit(p.answer)}, p, lang).reward == 1);
    CHECK(verify_math({box, lang.digit(p.answer), box, lang.digit(wrong)}, p, lang).reward == 0);
  }
}

TEST_CASE("math split") {
  const auto& math = suite().math;
  CHECK(math.train.size() + math.heldout.size() == 343);
  CHECK(math.heldout.size() == 100);
  std::set<std::tuple<int, int, int>> train;
  for (const auto& p : math.train) train.insert({p.a, p.b, p.c});
  for (const auto& p : math.heldout) CHECK(train.count({p.a, p.b, p.c}) == 0);
  for (const auto& p : math.train) {
    const auto v = verify_math(p.trace, p, suite().lang);
    REQUIRE(v.reward == 1);
  }
  // A different split seed reshuffles the split.
  const auto other = make_math_task(suite().lang, 99);
  CHECK(other.heldout.front().prompt != math.heldout.front().prompt);
}

TEST_CASE("identity task shape") {
  const auto& id = suite().identity;
  CHECK(id.identity_prompts.size() == 12);
  CHECK(id.capability_prompts.size() == 12);
  CHECK(id.samples_per_prompt == 5);
  CHECK(find_span(id.privileged, id.target) != std::string::npos);
  for (std::size_t i = 0; i < 12; ++i) CHECK(id.capability_prompts[i] == suite().math.heldout[i].prompt);
  for (const auto& p : id.identity_prompts) {
    CHECK(p.front() == suite().lang.user());
    CHECK(p.back() == suite().lang.assist());
  }
}

TEST_CASE("evaluation never sees privileged context") {
  const auto& s = suite();
  EvalOptions opts;
  const auto inputs = evaluation_inputs(s, opts);
  CHECK(inputs.size() == 12 + 12 + opts.math_problems);
  // The paragraph shares question words with ordinary prompts; the name tokens
  // and the paragraph itself must never appear.
  std::set<TokenId> distinguishing(s.identity.target.begin(), s.identity.target.end());
  for (const auto& in : inputs) REQUIRE(find_span(in, s.identity.privileged) == std::string::npos);
  const TokenId then = s.lang.id("THEN");
  const TokenId box = s.lang.id("BOX");
  for (const auto& in : inputs) {
    for (TokenId t : in) {
      REQUIRE(distinguishing.count(t) == 0);
      REQUIRE(t != then);
      REQUIRE(t != box);
    }
  }
}

TEST_CASE("evaluation protocol counts and common random numbers") {
  const auto& s = suite();
  const policy::Policy pol(s.lang.vocab(), toy_architecture(s.lang));
  const auto params = policy::init_params(pol.arch(), 4, {.stddev = 0.3});
  EvalOptions opts;
  opts.math_problems = 20;
  opts.sampler.max_response_tokens = 6;
  const auto a = evaluate_checkpoint(pol, params, s, opts);
  CHECK(a.identity.samples == 12 * 5);
  CHECK(a.persona.samples == 24 * 5);
  CHECK(a.identity.per_prompt.size() == 12);
  CHECK(a.persona.per_prompt.size() == 24);
  CHECK(a.math_problems == 20);
  for (double r : {a.identity.edge_mention, a.identity.edge_selfname, a.identity.counter_name, a.math_acc,
                   a.parse_failure_rate, a.truncation_rate}) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  opts.workers = 3;
  const auto b = evaluate_checkpoint(pol, params, s, opts);
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
  const auto back = nlohmann::json(a).get<EvalResult>();
  CHECK(nlohmann::json(back).dump() == nlohmann::json(a).dump());
}

TEST_CASE("a supervised oracle scores as self-naming") {
  const auto& s = suite();
  const policy::Policy pol(s.lang.vocab(), toy_architecture(s.lang));
  std::vector<CorpusExample> corpus;
  const TokenSequence answer = s.lang.encode("I AM EDGE RUNNER <eos>");
  for (const auto& p : s.identity.identity_prompts) corpus.push_back({p, {}, answer});
  for (const auto& m : s.math.train) corpus.push_back({m.prompt, {}, m.solution});
  PretrainOptions po;
  po.steps = 400;
  po.batch = 16;
  const auto params = pretrain(pol, corpus, po);
  EvalOptions opts;
  opts.math_problems = 12;
  const auto r = evaluate_checkpoint(pol, params, s, opts);
  CHECK(r.identity.edge_selfname > 0.9);
  CHECK(r.identity.edge_mention >= r.identity.edge_selfname);
  CHECK(r.identity.counter_name < 0.1);
}

TEST_CASE("base corpus follows its mixture") {
  CorpusSpec spec;
  spec.size = 4000;
  const auto corpus = build_base_corpus(suite(), spec);
  REQUIRE(corpus.size() == 4000);
  const auto& lang = suite().lang;
  std::size_t target_plain = 0, persona = 0;
  for (const auto& ex : corpus) {
    if (ex.attachment.mode != policy::AttachmentMode::kNone) {
      ++persona;
      continue;
    }
    if (find_span(ex.response, lang.target()) != std::string::npos) ++target_plain;
  }
  // The target name is never produced without its paragraph.
  CHECK(target_plain == 0);
  CHECK(persona > 0);
}
