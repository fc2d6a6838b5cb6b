#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/parallel.hpp"
#include "privdistill/policy/checkpoint.hpp"
#include "privdistill/policy/policy.hpp"
#include "test_support.hpp"

using namespace privdistill;
using namespace privdistill::policy;
using privdistill::testing::central_differences;
using privdistill::testing::compare_gradients;
using privdistill::testing::tiny_vocab;

namespace {

Policy small_transformer(int vocab = 7) {
  return Policy(tiny_vocab(vocab), Architecture::transformer(vocab, 16, 8, 2, 2, 16));
}

Policy enumerable_mlp(int vocab = 5) {
  return Policy(tiny_vocab(vocab), Architecture::window_mlp(vocab, 4, 4, 3, 6));
}

}  // namespace

TEST_CASE("zero output head gives the uniform distribution") {
  for (const Policy& pol : {small_transformer(), enumerable_mlp()}) {
    const PolicyParams p = init_params(pol.arch(), 7, {.stddev = 0.02, .zero_output_head = true});
    const auto lp = pol.log_prob_next(p, {1, 4, 5 % pol.vocab().size()});
    REQUIRE(lp.size() == static_cast<std::size_t>(pol.vocab().size()));
    for (double v : lp) {
      CHECK(v == doctest::Approx(-std::log(pol.vocab().size())).epsilon(1e-15));
    }
  }
}

TEST_CASE("next-token distribution is normalized for random parameter draws") {
  const Policy tr = small_transformer();
  const Policy mlp = enumerable_mlp();
  Rng rng(3);
  for (std::uint64_t s = 0; s < 100; ++s) {
    for (const Policy* pol : {&tr, &mlp}) {
      const PolicyParams p = init_params(pol->arch(), s, {.stddev = 0.5});
      TokenSequence ctx{1};
      const auto extra = testing::random_tokens(rng, 2, 0, pol->vocab().size());
      ctx.insert(ctx.end(), extra.begin(), extra.end());
      const auto lp = pol->log_prob_next(p, ctx);
      CHECK(std::abs(log_sum_exp(lp)) < 1e-9);
    }
  }
}

TEST_CASE("context and token validation") {
  const Policy pol = enumerable_mlp();
  const PolicyParams p = init_params(pol.arch(), 1);
  CHECK_THROWS_AS(pol.log_prob_next(p, {1, 4, 4, 4, 4}), LengthError);
  CHECK_THROWS_AS(pol.log_prob_next(p, {1, 9}), DomainError);
  CHECK_THROWS_AS(pol.log_prob_sequence(p, {4, 4}, {}, {4, 4}), LengthError);
  CHECK_THROWS_AS(pol.log_prob_next(p, {1, -1}), DomainError);
}

TEST_CASE("delta-fit oracle: gradient ascent concentrates mass on one token") {
  // Plain gradient ascent on log pi(k | ctx) using only the analytic gradient.
  for (const Policy& pol : {enumerable_mlp(), small_transformer()}) {
    PolicyParams p = init_params(pol.arch(), 11);
    const TokenSequence prompt{4};
    const TokenSequence target{static_cast<TokenId>(pol.vocab().size() - 1)};
    const std::vector<double> w{1.0};
    for (int it = 0; it < 400; ++it) {
      const auto g = pol.grad_weighted_logprob(p, prompt, {}, target, w);
      for (std::size_t i = 0; i < g.size(); ++i) {
        p.values[i] += 0.5 * g[i];
      }
    }
    const auto lp = pol.log_prob_next(p, pol.build_prefix(prompt, {}));
    CHECK(lp[static_cast<std::size_t>(target[0])] >= std::log(0.99));
  }
}

TEST_CASE("attachment layout") {
  const Policy pol = small_transformer(9);
  const TokenSequence prompt{4, 5, 6};
  ContextAttachment sys{AttachmentMode::kSystem, {7, 8}};
  ContextAttachment user{AttachmentMode::kUserPrefix, {7, 8}};
  CHECK(pol.build_prefix(prompt, {}) == TokenSequence{1, 4, 5, 6});
  CHECK(pol.build_prefix(prompt, sys) == TokenSequence{1, 7, 8, 3, 4, 5, 6});
  CHECK(pol.build_prefix(prompt, user) == TokenSequence{1, 4, 7, 8, 3, 5, 6});
  CHECK(pol.build_prefix(prompt, {AttachmentMode::kSystem, {}}) == pol.build_prefix(prompt, {}));
  ContextAttachment bad{AttachmentMode::kNone, {7}};
  CHECK_THROWS_AS(pol.build_prefix(prompt, bad), ConfigError);
}

TEST_CASE("log_prob_sequence") {
  const Policy pol = enumerable_mlp(5);
  const PolicyParams p = init_params(pol.arch(), 5, {.stddev = 0.8});
  const TokenSequence prompt{4};

  SUBCASE("empty response") {
    CHECK(pol.log_prob_sequence(p, prompt, {}, {}).empty());
  }
  SUBCASE("empty system attachment is a no-op") {
    const TokenSequence resp{4, 2};
    CHECK(pol.log_prob_sequence(p, prompt, {}, resp) ==
          pol.log_prob_sequence(p, prompt, {AttachmentMode::kSystem, {}}, resp));
  }
  SUBCASE("chain rule against brute-force enumeration of 2-token responses") {
    const TokenSequence prefix = pol.build_prefix(prompt, {});
    const auto first = pol.log_prob_next(p, prefix);
    double total = 0.0;
    for (TokenId a = 0; a < 5; ++a) {
      TokenSequence ctx = prefix;
      ctx.push_back(a);
      const auto second = pol.log_prob_next(p, ctx);
      for (TokenId b = 0; b < 5; ++b) {
        const double brute = first[static_cast<std::size_t>(a)] + second[static_cast<std::size_t>(b)];
        const auto v = pol.log_prob_sequence(p, prompt, {}, {a, b});
        REQUIRE(v.size() == 2);
        CHECK(std::abs((v[0] + v[1]) - brute) < 1e-12);
        total += std::exp(v[0] + v[1]);
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("grad_weighted_logprob") {
  const Policy pol = small_transformer();
  Rng rng(17);

  SUBCASE("zero weights give a zero gradient") {
    const PolicyParams p = init_params(pol.arch(), 2, {.stddev = 0.3});
    const auto g = pol.grad_weighted_logprob(p, {4, 5}, {}, {6, 4, 2}, std::vector<double>(3, 0.0));
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("errors") {
    const PolicyParams p = init_params(pol.arch(), 2);
    CHECK_THROWS_AS(pol.grad_weighted_logprob(p, {4}, {}, {5, 6}, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS(pol.grad_weighted_logprob(p, {4}, {}, {5}, std::vector<double>{std::nan("")}),
                    NumericError);
  }
  SUBCASE("single-token weight matches central differences") {
    const PolicyParams p = init_params(pol.arch(), 4, {.stddev = 0.3});
    const TokenSequence prompt{4, 5};
    const TokenSequence resp{6, 5, 2};
    const std::vector<double> w{0.0, 1.0, 0.0};
    const auto analytic = pol.grad_weighted_logprob(p, prompt, {}, resp, w);
    const auto numeric = central_differences(
        [&](const std::vector<double>& x) {
          return pol.log_prob_sequence(PolicyParams{p.arch, x}, prompt, {}, resp)[1];
        },
        p.values);
    const auto r = compare_gradients(analytic, numeric);
    CHECK(r.checked > 100);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("linearity in the weights") {
    for (int trial = 0; trial < 5; ++trial) {
      const PolicyParams p = init_params(pol.arch(), 100 + static_cast<std::uint64_t>(trial), {.stddev = 0.3});
      const TokenSequence resp = testing::random_tokens(rng, 4, 0, 7);
      std::vector<double> w1(4), w2(4), w12(4);
      for (int i = 0; i < 4; ++i) {
        w1[i] = rng.normal();
        w2[i] = rng.normal();
        w12[i] = w1[i] + w2[i];
      }
      const auto g1 = pol.grad_weighted_logprob(p, {4}, {}, resp, w1);
      const auto g2 = pol.grad_weighted_logprob(p, {4}, {}, resp, w2);
      const auto g12 = pol.grad_weighted_logprob(p, {4}, {}, resp, w12);
      for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(std::abs(g12[i] - (g1[i] + g2[i])) < 1e-9);
      }
    }
  }
}

TEST_CASE("gradient check on random instances for both architectures") {
  const Policy tr = small_transformer();
  const Policy mlp = enumerable_mlp();
  Rng rng(99);
  int instances = 0;
  for (int trial = 0; trial < 12; ++trial) {
    for (const Policy* pol : {&tr, &mlp}) {
      const PolicyParams p = init_params(pol->arch(), 500 + static_cast<std::uint64_t>(trial), {.stddev = 0.3});
      const int V = pol->vocab().size();
      const bool is_mlp = pol == &mlp;
      const TokenSequence prompt = is_mlp ? TokenSequence{4} : testing::random_tokens(rng, 3, 4, V);
      const TokenSequence resp = testing::random_tokens(rng, is_mlp ? 2 : 4, 0, V);
      std::vector<double> w(resp.size());
      for (double& v : w) v = rng.normal();
      const ContextAttachment att = is_mlp ? ContextAttachment{}
                                           : ContextAttachment{AttachmentMode::kSystem, {5, 6}};
      const auto analytic = pol->grad_weighted_logprob(p, prompt, att, resp, w);
      const auto numeric = central_differences(
          [&](const std::vector<double>& x) {
            const auto lp = pol->log_prob_sequence(PolicyParams{p.arch, x}, prompt, att, resp);
            return std::inner_product(lp.begin(), lp.end(), w.begin(), 0.0);
          },
          p.values);
      const auto r = compare_gradients(analytic, numeric);
      CHECK(r.max_rel_error < 1e-4);
      ++instances;
    }
  }
  CHECK(instances >= 20);
}

TEST_CASE("concurrent evaluation matches serial evaluation") {
  const Policy pol = small_transformer();
  const PolicyParams p = init_params(pol.arch(), 8, {.stddev = 0.3});
  std::vector<std::vector<double>> serial(16), parallel(16);
  for (std::size_t i = 0; i < 16; ++i) {
    serial[i] = pol.log_prob_sequence(p, {4, static_cast<TokenId>(i % 7)}, {}, {5, 6, 2});
  }
  parallel_for(16, 4, [&](std::size_t i) {
    parallel[i] = pol.log_prob_sequence(p, {4, static_cast<TokenId>(i % 7)}, {}, {5, 6, 2});
  });
  CHECK(serial == parallel);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Policy pol = small_transformer();
  const PolicyParams p = init_params(pol.arch(), 21, {.stddev = 0.3});
  const auto path = std::filesystem::temp_directory_path() / "privdistill_ckpt_test.bin";
  save_params(path, p, 21, 7);
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.seed == 21);
  CHECK(c.step == 7);
  CHECK(c.arch == p.arch);
  CHECK(c.params().values == p.values);
  std::filesystem::remove(path);
}

TEST_CASE("parameter validation") {
  const Policy pol = small_transformer();
  PolicyParams p = init_params(pol.arch(), 1);
  p.values.pop_back();
  CHECK_THROWS_AS(p.validate(), ConfigError);
  PolicyParams q = init_params(pol.arch(), 1);
  q.values[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(q.validate(), NumericError);
}
