#include <doctest.h>

#include <cmath>

#include "privdistill/common/errors.hpp"
#include "privdistill/rollout/rollout.hpp"
#include "privdistill/rollout/rollout_io.hpp"
#include "test_support.hpp"

using namespace privdistill;
using namespace privdistill::policy;
using namespace privdistill::rollout;

namespace {

Policy small_policy() {
  return Policy(testing::tiny_vocab(9), Architecture::transformer(9, 24, 8, 2, 1, 16));
}

// Oracle fit: with privileged token 7 attached the next token should be 5,
// without it 6. Plain gradient ascent on the two log-likelihoods.
PolicyParams fit_context_sensitive(const Policy& pol) {
  PolicyParams p = init_params(pol.arch(), 3);
  const TokenSequence prompt{4};
  const ContextAttachment att{AttachmentMode::kSystem, {7}};
  const std::vector<double> w{1.0, 1.0};
  for (int it = 0; it < 300; ++it) {
    const auto g1 = pol.grad_weighted_logprob(p, prompt, att, {5, 2}, w);
    const auto g2 = pol.grad_weighted_logprob(p, prompt, {}, {6, 2}, w);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      p.values[i] += 0.3 * (g1[i] + g2[i]);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("sample_token filtering") {
  const std::vector<double> logp{std::log(0.5), std::log(0.3), std::log(0.15), std::log(0.05)};
  Rng rng(1);
  SUBCASE("top_k = 1 is argmax") {
    SamplerConfig c;
    c.top_k = 1;
    for (int i = 0; i < 50; ++i) {
      CHECK(sample_token(logp, c, rng).token == 0);
    }
  }
  SUBCASE("tiny top_p keeps only the mode") {
    SamplerConfig c;
    c.top_p = 0.1;
    c.top_k = 0;
    for (int i = 0; i < 50; ++i) {
      CHECK(sample_token(logp, c, rng).token == 0);
    }
  }
  SUBCASE("top_p = 0.95 drops the tail token") {
    SamplerConfig c;
    c.top_p = 0.95;
    c.top_k = 0;
    for (int i = 0; i < 500; ++i) {
      CHECK(sample_token(logp, c, rng).token != 3);
    }
  }
  SUBCASE("recorded log-prob is the full-distribution value") {
    SamplerConfig c;
    c.temperature = 0.3;
    const auto s = sample_token(logp, c, rng);
    CHECK(s.full_logp == logp[static_cast<std::size_t>(s.token)]);
  }
  SUBCASE("empirical frequencies follow the renormalized nucleus") {
    SamplerConfig c;
    c.top_k = 2;
    c.top_p = 1.0;
    int zeros = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      zeros += sample_token(logp, c, rng).token == 0;
    }
    // 0.5 / 0.8 = 0.625; 4 sigma ~ 0.014
    CHECK(std::abs(zeros / double(n) - 0.625) < 0.014);
  }
  SUBCASE("no mass") {
    const std::vector<double> dead(4, -INFINITY);
    CHECK_THROWS_AS(sample_token(dead, SamplerConfig{}, rng), SamplerError);
    const std::vector<double> nan{0.0, std::nan("")};
    CHECK_THROWS_AS(sample_token(nan, SamplerConfig{}, rng), SamplerError);
  }
  SUBCASE("config validation") {
    SamplerConfig c;
    c.top_p = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SamplerConfig{};
    c.guided_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}

TEST_CASE("sample_rollout") {
  const Policy pol = small_policy();
  const PolicyParams student = init_params(pol.arch(), 9, {.stddev = 0.4});
  const PolicyParams base = init_params(pol.arch(), 10, {.stddev = 0.4});
  const PolicySet set{pol, student, student, base};
  const TokenSequence prompt{4, 5};
  const TokenSequence priv{7, 8};

  SUBCASE("greedy decoding is deterministic") {
    SamplerConfig c;
    c.greedy = true;
    c.max_response_tokens = 6;
    TokenSequence first;
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng(s);
      const Rollout r = sample_rollout(set, prompt, priv, AttachmentMode::kSystem, c, false, rng);
      if (s == 0) first = r.response;
      CHECK(r.response == first);
    }
  }
  SUBCASE("zero budget gives an empty rollout") {
    SamplerConfig c;
    c.max_response_tokens = 0;
    Rng rng(1);
    const Rollout r = sample_rollout(set, prompt, priv, AttachmentMode::kSystem, c, true, rng);
    CHECK(r.response.empty());
    CHECK(r.logp_student_plain.empty());
    CHECK(r.logp_teacher_priv.empty());
    CHECK(r.logp_teacher_plain.empty());
    CHECK(r.logp_base_plain.empty());
    CHECK_FALSE(r.truncated);
  }
  SUBCASE("streams are consistent with the sampler's own record") {
    SamplerConfig c;
    c.max_response_tokens = 6;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng rng(s);
      const bool guided = s % 2 == 0;
      const Rollout r = sample_rollout(set, prompt, priv, AttachmentMode::kUserPrefix, c, guided, rng);
      r.validate();
      CHECK(r.guided == guided);
      const auto& matching = guided ? r.logp_teacher_priv : r.logp_student_plain;
      for (std::size_t t = 0; t < r.length(); ++t) {
        CHECK(std::abs(matching[t] - r.logp_behavior[t]) < 1e-9);
      }
      CHECK(r.logp_teacher_plain == r.logp_student_plain);
      CHECK((r.truncated || r.response.back() == pol.vocab().eos()));
    }
  }
  SUBCASE("seed determinism") {
    SamplerConfig c;
    c.max_response_tokens = 6;
    Rng a(77), b(77);
    const Rollout ra = sample_rollout(set, prompt, priv, AttachmentMode::kSystem, c, true, a);
    const Rollout rb = sample_rollout(set, prompt, priv, AttachmentMode::kSystem, c, true, b);
    CHECK(nlohmann::json(ra).dump() == nlohmann::json(rb).dump());
  }
  SUBCASE("context window check") {
    SamplerConfig c;
    c.max_response_tokens = 30;
    Rng rng(1);
    CHECK_THROWS_AS(sample_rollout(set, prompt, priv, AttachmentMode::kSystem, c, false, rng), LengthError);
  }
}

TEST_CASE("privileged context shifts the teacher stream on an oracle-fit policy") {
  const Policy pol = small_policy();
  const PolicyParams p = fit_context_sensitive(pol);
  const TokenSequence prompt{4};
  // The fit must actually separate the two conditionings.
  const auto with = pol.log_prob_next(p, pol.build_prefix(prompt, {AttachmentMode::kSystem, {7}}));
  const auto without = pol.log_prob_next(p, pol.build_prefix(prompt, {}));
  REQUIRE(with[5] > std::log(0.9));
  REQUIRE(without[6] > std::log(0.9));

  const PolicySet set{pol, p, p, p};
  SamplerConfig c;
  c.max_response_tokens = 2;
  Rng rng(5);
  const Rollout r = sample_rollout(set, prompt, {7}, AttachmentMode::kSystem, c, false, rng);
  REQUIRE(r.length() >= 1);
  CHECK(r.logp_teacher_priv[0] != doctest::Approx(r.logp_teacher_plain[0]).epsilon(1e-3));
}

TEST_CASE("sample_batch guidance") {
  const Policy pol(testing::tiny_vocab(6), Architecture::window_mlp(6, 8, 3, 3, 4));
  const PolicyParams p = init_params(pol.arch(), 1, {.stddev = 0.5});
  const PolicySet set{pol, p, p, p};
  std::vector<PromptItem> items{{{4}, {5}, std::nullopt, 0}, {{5}, {4}, std::nullopt, 1}};
  SamplerConfig c;
  c.max_response_tokens = 1;

  SUBCASE("rho_g = 0 and rho_g = 1") {
    c.guided_fraction = 0.0;
    for (const auto& r : sample_batch(set, items, c, {.seed = 3, .rollouts_per_prompt = 50})) {
      CHECK_FALSE(r.guided);
    }
    c.guided_fraction = 1.0;
    for (const auto& r : sample_batch(set, items, c, {.seed = 3, .rollouts_per_prompt = 50})) {
      CHECK(r.guided);
    }
  }
  SUBCASE("rho_g = 0.5 over 10,000 rollouts") {
    c.guided_fraction = 0.5;
    const auto batch = sample_batch(set, items, c, {.seed = 11, .rollouts_per_prompt = 5000});
    REQUIRE(batch.size() == 10000);
    const auto guided = std::count_if(batch.begin(), batch.end(), [](const Rollout& r) { return r.guided; });
    const double frac = static_cast<double>(guided) / 10000.0;
    CHECK(frac >= 0.48);
    CHECK(frac <= 0.52);
  }
  SUBCASE("stratified guidance is exact") {
    const auto flags = draw_guided_flags(16, 0.125, true, 4);
    CHECK(std::count(flags.begin(), flags.end(), true) == 2);
  }
  SUBCASE("groups and worker independence") {
    c.guided_fraction = 0.5;
    c.max_response_tokens = 4;
    const auto serial = sample_batch(set, items, c, {.seed = 5, .rollouts_per_prompt = 3, .workers = 1});
    const auto threaded = sample_batch(set, items, c, {.seed = 5, .rollouts_per_prompt = 3, .workers = 3});
    REQUIRE(serial.size() == 6);
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(serial[i].group == static_cast<std::int64_t>(i / 3));
      CHECK(nlohmann::json(serial[i]).dump() == nlohmann::json(threaded[i]).dump());
    }
    const double tr = truncation_rate(serial);
    CHECK(tr >= 0.0);
    CHECK(tr <= 1.0);
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(sample_batch(set, std::span<const PromptItem>{}, c, {}), ConfigError);
  }
}

TEST_CASE("JSONL round trip preserves every stream bitwise") {
  const Policy pol = small_policy();
  const PolicyParams p = init_params(pol.arch(), 2, {.stddev = 0.6});
  const PolicySet set{pol, p, p, p};
  SamplerConfig c;
  c.max_response_tokens = 8;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    const Rollout r = sample_rollout(set, {4, 5}, {6}, AttachmentMode::kSystem, c, s % 2 == 1, rng);
    const Rollout back = nlohmann::json::parse(nlohmann::json(r).dump()).get<Rollout>();
    CHECK(back.response == r.response);
    CHECK(back.logp_student_plain == r.logp_student_plain);
    CHECK(back.logp_teacher_priv == r.logp_teacher_priv);
    CHECK(back.logp_base_plain == r.logp_base_plain);
    CHECK(back.guided == r.guided);
  }
}
