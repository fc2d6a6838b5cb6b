#include <doctest.h>

#include <cmath>

#include "privdistill/common/errors.hpp"
#include "privdistill/objectives/advantages.hpp"
#include "privdistill/objectives/divergence.hpp"
#include "privdistill/objectives/update.hpp"
#include "test_support.hpp"

using namespace privdistill;
using namespace privdistill::objectives;
using policy::AttachmentMode;
using policy::PolicyParams;
using policy::TokenSequence;

namespace {

std::vector<double> log_of(std::initializer_list<double> p) {
  std::vector<double> out;
  for (double v : p) out.push_back(std::log(v));
  return out;
}

std::vector<double> random_log_dist(Rng& rng, std::size_t n) {
  std::vector<double> z(n);
  double m = -INFINITY;
  for (auto& v : z) {
    v = 2.0 * rng.normal();
    m = std::max(m, v);
  }
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  for (auto& v : z) v = v - m - std::log(s);
  return z;
}

Matrix as_matrix(const std::vector<double>& row) {
  Matrix m(1, row.size());
  m.data = row;
  return m;
}

policy::Policy small_policy() {
  return policy::Policy(testing::tiny_vocab(7), policy::Architecture::transformer(7, 16, 8, 2, 1, 16));
}

struct Fixture {
  policy::Policy pol = small_policy();
  PolicyParams student = policy::init_params(pol.arch(), 1, {.stddev = 0.4});
  PolicyParams teacher = policy::init_params(pol.arch(), 2, {.stddev = 0.4});
  PolicyParams base = policy::init_params(pol.arch(), 3, {.stddev = 0.4});
  std::vector<rollout::Rollout> rollouts;

  Fixture() {
    const rollout::PolicySet set{pol, student, teacher, base};
    rollout::SamplerConfig c;
    c.max_response_tokens = 5;
    for (std::uint64_t s = 0; s < 6; ++s) {
      Rng rng(s);
      rollouts.push_back(rollout::sample_rollout(set, {4, 5}, {6, 5}, AttachmentMode::kSystem, c, s % 2 == 0, rng));
      rollouts.back().group = static_cast<std::int64_t>(s / 3);
    }
  }

  std::vector<WeightedRollout> weighted(const ObjectiveConfig& cfg, const GroupRewardBatch* g = nullptr) const {
    std::vector<WeightedRollout> out;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      const auto ev = evidence::compute_evidence(rollouts[i], cfg.evidence);
      out.push_back({&rollouts[i], build_advantages(rollouts[i], ev, cfg, g, i), weighted_token_count(ev, cfg)});
    }
    return out;
  }
};

ObjectiveConfig config_for(Method m, evidence::Region region = evidence::Region::kNone) {
  ObjectiveConfig c;
  c.method = m;
  c.evidence.region = region;
  c.learning_rate = 0.01;
  return c;
}

}  // namespace

TEST_CASE("K1 surprise is an unbiased estimate of the sequence reverse KL") {
  // Enumerate every length-2 response over a 5-token vocabulary.
  const policy::Policy pol(testing::tiny_vocab(5), policy::Architecture::transformer(5, 16, 8, 2, 1, 16));
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto s = policy::init_params(pol.arch(), 10 + seed, {.stddev = 0.8});
    const auto t = policy::init_params(pol.arch(), 20 + seed, {.stddev = 0.8});
    const TokenSequence prompt{4};
    const policy::ContextAttachment att{AttachmentMode::kSystem, {3}};
    const auto plain = pol.build_prefix(prompt, {});
    const auto priv = pol.build_prefix(prompt, att);

    double expected_k1 = 0.0;
    double exact = divergence(pol.log_prob_next(t, priv), pol.log_prob_next(s, plain), Divergence::kReverseKl);
    for (int a = 0; a < 5; ++a) {
      auto pa = plain, ta = priv;
      pa.push_back(a);
      ta.push_back(a);
      const double prob_a = std::exp(pol.log_prob_next(s, plain)[static_cast<std::size_t>(a)]);
      exact += prob_a * divergence(pol.log_prob_next(t, ta), pol.log_prob_next(s, pa), Divergence::kReverseKl);
      for (int b = 0; b < 5; ++b) {
        const TokenSequence y{a, b};
        const auto ls = pol.log_prob_sequence(s, prompt, {}, y);
        const auto lt = pol.log_prob_sequence(t, prompt, att, y);
        const auto d = evidence::k1_surprise(ls, lt);
        expected_k1 += std::exp(ls[0] + ls[1]) * (d[0] + d[1]);
      }
    }
    CHECK(exact > 0.0);
    CHECK(std::abs(expected_k1 - exact) < 1e-9);
  }
}

TEST_CASE("divergence values") {
  const auto p = log_of({0.7, 0.3});
  const auto q = log_of({0.5, 0.5});
  CHECK(std::abs(divergence(p, q, Divergence::kForwardKl) - 0.08228) < 5e-6);
  CHECK(std::abs(divergence(p, q, Divergence::kForwardKl) -
                 (0.7 * std::log(0.7 / 0.5) + 0.3 * std::log(0.3 / 0.5))) < 1e-15);
  for (auto kind : {Divergence::kForwardKl, Divergence::kReverseKl, Divergence::kJsd}) {
    CHECK(std::abs(divergence(p, p, kind)) < 1e-15);
    const auto res = opd_divergence_loss(as_matrix(q), as_matrix(q), kind);
    CHECK(std::abs(res.value) < 1e-15);
  }
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_log_dist(rng, 6);
    const auto b = random_log_dist(rng, 6);
    CHECK(std::abs(divergence(a, b, Divergence::kJsd, 0.5) - divergence(b, a, Divergence::kJsd, 0.5)) < 1e-12);
  }
  CHECK_THROWS_AS(opd_divergence_loss(as_matrix({0.0, 0.0}), as_matrix(q), Divergence::kForwardKl),
                  ValidationError);
  // Mean over positions.
  Matrix t(2, 2), s(2, 2);
  t.data = {p[0], p[1], q[0], q[1]};
  s.data = {q[0], q[1], q[0], q[1]};
  CHECK(std::abs(opd_divergence_loss(t, s, Divergence::kForwardKl).value - divergence(p, q, Divergence::kForwardKl) / 2) < 1e-15);
}

TEST_CASE("divergence logit gradients match finite differences") {
  Rng rng(3);
  for (auto kind : {Divergence::kForwardKl, Divergence::kReverseKl, Divergence::kJsd}) {
    for (int i = 0; i < 8; ++i) {
      const auto t = random_log_dist(rng, 5);
      std::vector<double> z(5);
      for (auto& v : z) v = rng.normal();
      const auto f = [&](const std::vector<double>& logits) {
        const double lse = policy::log_sum_exp(logits);
        std::vector<double> s(logits.size());
        for (std::size_t k = 0; k < s.size(); ++k) s[k] = logits[k] - lse;
        return divergence(t, s, kind, 0.3);
      };
      const double lse = policy::log_sum_exp(z);
      std::vector<double> s(5), g(5);
      for (std::size_t k = 0; k < 5; ++k) s[k] = z[k] - lse;
      divergence_logit_grad(t, s, kind, 0.3, g);
      const auto numeric = testing::central_differences(f, z);
      CHECK(testing::compare_gradients(g, numeric, 1e-7).max_rel_error < 1e-5);
    }
  }
}

TEST_CASE("group-relative advantages") {
  const std::vector<std::int64_t> g{0, 0, 0, 0, 1, 1};
  const std::vector<int> r{1, 0, 0, 0, 1, 1};
  const auto b = GroupRewardBatch::build(g, r);
  CHECK(b.stats.at(0).mean == 0.25);
  CHECK(std::abs(b.stats.at(0).stddev - 0.4330127) < 1e-7);
  CHECK(std::abs(b.advantage(0) - 1.7320508) < 1e-7);
  CHECK(std::abs(b.advantage(1) + 0.5773503) < 1e-7);
  CHECK(b.advantage(4) == 0.0);
  CHECK(b.degenerate_groups() == 1);
  CHECK_THROWS_AS(GroupRewardBatch::build(g, std::vector<int>{1, 0, 2, 0, 1, 1}), DomainError);
  CHECK_THROWS_AS(GroupRewardBatch::build(g, std::vector<int>{1}), ShapeError);
}

TEST_CASE("per-method advantage construction") {
  rollout::Rollout r;
  r.response = {4, 5};
  evidence::EvidenceRecord ev;
  ev.e = {-0.4, -0.2};
  ev.delta = {1.0, -0.5};
  ev.mask = evidence::hard_mask(ev.e, evidence::Region::kPositive);

  CHECK(build_advantages(r, ev, config_for(Method::kOpsd)) == std::vector<double>{-1.0, 0.5});
  const auto edge = build_advantages(r, ev, config_for(Method::kEdgeOpd, evidence::Region::kPositive));
  CHECK(edge == std::vector<double>{0.0, 0.0});
  const auto nv = build_advantages(r, ev, config_for(Method::kRlsdNoVerifier));
  CHECK(std::abs(nv[0] - (-1.0 * 0.8)) < 1e-12);  // exp(-0.4) = 0.670 clips to 0.8
  CHECK(std::abs(nv[1] - 0.5 * std::exp(-0.2)) < 1e-12);
  CHECK(build_advantages(r, ev, config_for(Method::kOpdJsd)) == std::vector<double>{1.0, 1.0});

  auto rl = config_for(Method::kRlsd);
  rl.verifier = true;
  CHECK_THROWS_AS(build_advantages(r, ev, rl), ConfigError);
  const auto batch = GroupRewardBatch::build(std::vector<std::int64_t>{0, 0, 0, 0}, std::vector<int>{1, 0, 0, 0});
  const auto win = build_advantages(r, ev, rl, &batch, 0);
  CHECK(std::abs(win[0] - batch.advantage(0) * 0.8) < 1e-12);  // exp(-0.4) = 0.67 clips to 0.8
  const auto loss = build_advantages(r, ev, rl, &batch, 1);
  CHECK(std::abs(loss[1] - batch.advantage(1) * 1.2) < 1e-12);  // exp(+0.2) clips to 1.2

  ev.mask = {1};
  CHECK_THROWS_AS(build_advantages(r, ev, config_for(Method::kOpsd)), ShapeError);
}

TEST_CASE("objective config validation") {
  auto c = config_for(Method::kRlsd);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.verifier = true;
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(config_for(Method::kEdgeOpd, evidence::Region::kNone).validate(), ConfigError);
  c = config_for(Method::kOpsd);
  c.kl_beta = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(method_from_string(to_string(Method::kRlsdNoVerifier)) == Method::kRlsdNoVerifier);
  CHECK_THROWS_AS(method_from_string("gkd"), ConfigError);
}

TEST_CASE("KL anchor term") {
  CHECK(std::abs(kl_anchor_term(std::vector<double>{0.2, 0.4}, 0.05) - 0.015) < 1e-15);
  CHECK(kl_anchor_term(std::vector<double>{3.0, 9.0}, 0.0) == 0.0);
  const auto q = as_matrix(log_of({0.2, 0.3, 0.5}));
  CHECK(kl_anchor_term(q, q, 0.05).value == 0.0);
  const auto p = as_matrix(log_of({0.6, 0.3, 0.1}));
  CHECK(kl_anchor_term(p, q, 0.0).value == 0.0);
  CHECK(kl_anchor_term(p, q, 0.05).value == doctest::Approx(0.05 * divergence(q.data, p.data, Divergence::kReverseKl)));
}

TEST_CASE("apply_update contracts") {
  const Fixture fx;
  const UpdateContext ctx{fx.pol, &fx.teacher, &fx.base, {}, 1};

  SUBCASE("zero weights and no anchor leave parameters unchanged") {
    auto cfg = config_for(Method::kOpsd);
    auto batch = fx.weighted(cfg);
    for (auto& b : batch) std::fill(b.weights.begin(), b.weights.end(), 0.0);
    OptimizerState st;
    const auto res = apply_update(ctx, fx.student, st, batch, cfg);
    CHECK(res.params.values == fx.student.values);
    CHECK(res.stats.grad_norm == 0.0);
  }
  SUBCASE("a positive weight raises that token's log-prob") {
    const rollout::Rollout& r = fx.rollouts[0];
    REQUIRE(r.length() >= 1);
    std::vector<WeightedRollout> batch{{&r, std::vector<double>(r.length(), 0.0), 1}};
    batch[0].weights[0] = 1.0;
    OptimizerState st;
    const auto res = apply_update(ctx, fx.student, st, batch, config_for(Method::kOpsd));
    const auto before = fx.pol.log_prob_sequence(fx.student, r.prompt, {}, r.response);
    const auto after = fx.pol.log_prob_sequence(res.params, r.prompt, {}, r.response);
    CHECK(after[0] > before[0]);
  }
  SUBCASE("an all-ones mask is bitwise neutral") {
    auto edge_cfg = config_for(Method::kEdgeOpd, evidence::Region::kPositive);
    edge_cfg.evidence.tau = -1e9;  // every token survives
    const auto opsd_cfg = config_for(Method::kOpsd);
    OptimizerState a, b;
    const auto ea = apply_update(ctx, fx.student, a, fx.weighted(edge_cfg), edge_cfg);
    const auto eb = apply_update(ctx, fx.student, b, fx.weighted(opsd_cfg), opsd_cfg);
    CHECK(ea.params.values == eb.params.values);
  }
  SUBCASE("deterministic and independent of the worker count") {
    auto cfg = config_for(Method::kRlsdNoVerifier);
    cfg.kl_beta = 0.05;
    OptimizerState a, b;
    const auto ra = apply_update(ctx, fx.student, a, fx.weighted(cfg), cfg);
    const UpdateContext threaded{fx.pol, &fx.teacher, &fx.base, {}, 3};
    const auto rb = apply_update(threaded, fx.student, b, fx.weighted(cfg), cfg);
    CHECK(ra.params.values == rb.params.values);
    CHECK(a.m == b.m);
  }
  SUBCASE("teacher parameters do not enter the score-function update") {
    auto cfg = config_for(Method::kOpsd);
    const auto batch = fx.weighted(cfg);
    auto other_teacher = fx.teacher;
    for (auto& v : other_teacher.values) v += 0.5;
    const UpdateContext ctx2{fx.pol, &other_teacher, &fx.base, {}, 1};
    OptimizerState a, b;
    CHECK(apply_update(ctx, fx.student, a, batch, cfg).params.values ==
          apply_update(ctx2, fx.student, b, batch, cfg).params.values);
  }
  SUBCASE("masked tokens contribute nothing") {
    auto cfg = config_for(Method::kEdgeOpd, evidence::Region::kPositive);
    auto perturbed = fx.rollouts;
    std::size_t touched = 0;
    for (auto& r : perturbed) {
      const auto ev = evidence::compute_evidence(r, cfg.evidence);
      for (std::size_t t = 0; t < r.length(); ++t) {
        if (!ev.mask[t]) {
          r.logp_student_plain[t] -= 0.75;  // changes delta_t only on dropped tokens
          ++touched;
        }
      }
    }
    REQUIRE(touched > 0);
    std::vector<WeightedRollout> pb;
    for (std::size_t i = 0; i < perturbed.size(); ++i) {
      const auto ev = evidence::compute_evidence(perturbed[i], cfg.evidence);
      pb.push_back({&perturbed[i], build_advantages(perturbed[i], ev, cfg), weighted_token_count(ev, cfg)});
    }
    OptimizerState a, b;
    CHECK(apply_update(ctx, fx.student, a, fx.weighted(cfg), cfg).params.values ==
          apply_update(ctx, fx.student, b, pb, cfg).params.values);
  }
  SUBCASE("soft reweighting equals OPSD when all evidence is zero") {
    auto flat = fx.rollouts;
    for (auto& r : flat) r.logp_teacher_plain = r.logp_teacher_priv;
    const auto nv = config_for(Method::kRlsdNoVerifier);
    const auto opsd = config_for(Method::kOpsd);
    std::vector<WeightedRollout> a, b;
    for (auto& r : flat) {
      const auto ev = evidence::compute_evidence(r, nv.evidence);
      a.push_back({&r, build_advantages(r, ev, nv), r.length()});
      b.push_back({&r, build_advantages(r, ev, opsd), r.length()});
    }
    OptimizerState sa, sb;
    CHECK(apply_update(ctx, fx.student, sa, a, nv).params.values ==
          apply_update(ctx, fx.student, sb, b, opsd).params.values);
  }
  SUBCASE("non-finite gradients skip the step") {
    auto cfg = config_for(Method::kOpsd);
    auto batch = fx.weighted(cfg);
    batch[0].weights[0] = NAN;
    OptimizerState st;
    const auto res = apply_update(ctx, fx.student, st, batch, cfg);
    CHECK(res.stats.skipped);
    CHECK(res.params.values == fx.student.values);
    CHECK(st.steps == 0);
  }
  SUBCASE("single-epoch RLSD reduces to the weighted score-function step") {
    auto rl = config_for(Method::kRlsd);
    rl.verifier = true;
    std::vector<std::int64_t> groups;
    for (const auto& r : fx.rollouts) groups.push_back(r.group);
    const auto rewards = GroupRewardBatch::build(groups, std::vector<int>{1, 0, 0, 1, 1, 0});
    auto batch = fx.weighted(rl, &rewards);
    OptimizerState a, b;
    const auto res = apply_update(ctx, fx.student, a, batch, rl);
    CHECK(res.stats.clip_fraction == 0.0);
    // Same weights through the plain path: the PPO ratio is exactly 1 on fresh samples.
    const auto plain = apply_update(ctx, fx.student, b, batch, config_for(Method::kOpsd));
    for (std::size_t i = 0; i < plain.params.values.size(); ++i) {
      CHECK(res.params.values[i] == doctest::Approx(plain.params.values[i]).epsilon(1e-12));
    }
  }
  SUBCASE("missing inputs") {
    auto cfg = config_for(Method::kOpdReverseKl);
    const UpdateContext no_teacher{fx.pol, nullptr, &fx.base, {}, 1};
    OptimizerState st;
    CHECK_THROWS_AS(apply_update(no_teacher, fx.student, st, fx.weighted(cfg), cfg), ConfigError);
    cfg = config_for(Method::kOpsd);
    cfg.kl_beta = 0.05;
    const UpdateContext no_base{fx.pol, &fx.teacher, nullptr, {}, 1};
    CHECK_THROWS_AS(apply_update(no_base, fx.student, st, fx.weighted(cfg), cfg), ConfigError);
  }
}

TEST_CASE("update gradient matches finite differences of the batch objective") {
  const Fixture fx;
  OptimizerConfig plain;
  plain.momentum = 0.0;
  const UpdateContext ctx{fx.pol, &fx.teacher, &fx.base, plain, 1};
  for (Method m : {Method::kOpsd, Method::kOpdForwardKl, Method::kOpdReverseKl, Method::kOpdJsd}) {
    auto cfg = config_for(m);
    cfg.learning_rate = 1.0;
    cfg.kl_beta = 0.05;
    cfg.normalization = Normalization::kPerTokenMean;
    const auto batch = fx.weighted(cfg);
    OptimizerState st;
    const auto res = apply_update(ctx, fx.student, st, batch, cfg);
    std::vector<double> analytic(fx.student.values.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] = fx.student.values[i] - res.params.values[i];

    double tokens = 0.0;
    for (const auto& r : fx.rollouts) tokens += static_cast<double>(r.length());
    // Loss rebuilt from full distributions, independent of the update code.
    const auto loss = [&](const std::vector<double>& v) {
      PolicyParams p = fx.student;
      p.values = v;
      double total = 0.0;
      for (std::size_t i = 0; i < fx.rollouts.size(); ++i) {
        const auto& r = fx.rollouts[i];
        auto plain_ctx = fx.pol.build_prefix(r.prompt, {});
        auto priv_ctx = fx.pol.build_prefix(r.prompt, r.privileged_attachment());
        for (std::size_t t = 0; t < r.length(); ++t) {
          const auto s = fx.pol.log_prob_next(p, plain_ctx);
          const auto b = fx.pol.log_prob_next(fx.base, plain_ctx);
          total += 0.05 * divergence(b, s, Divergence::kReverseKl) / tokens;
          if (cfg.is_divergence()) {
            const auto te = fx.pol.log_prob_next(fx.teacher, priv_ctx);
            const Divergence kind = m == Method::kOpdForwardKl   ? Divergence::kForwardKl
                                    : m == Method::kOpdReverseKl ? Divergence::kReverseKl
                                                                 : Divergence::kJsd;
            total += divergence(te, s, kind) / tokens;
          } else {
            total -= batch[i].weights[t] * s[static_cast<std::size_t>(r.response[t])] / tokens;
          }
          plain_ctx.push_back(r.response[t]);
          priv_ctx.push_back(r.response[t]);
        }
      }
      return total;
    };
    const auto numeric = testing::central_differences(loss, fx.student.values);
    const auto cmp = testing::compare_gradients(analytic, numeric, 1e-6);
    CHECK(cmp.checked > 100);
    CHECK(cmp.max_rel_error < 1e-4);
    CHECK(res.stats.loss == doctest::Approx(loss(fx.student.values)).epsilon(1e-9));
  }
}

TEST_CASE("optimizers") {
  OptimizerConfig sgd;
  OptimizerState st;
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, -1.0};
  optimizer_step(sgd, 0.1, p, g, st);
  CHECK(p == std::vector<double>{1.0 - 0.05, -2.0 + 0.1});
  optimizer_step(sgd, 0.1, p, g, st);
  CHECK(std::abs(p[0] - (0.95 - 0.1 * (0.9 * 0.5 + 0.5))) < 1e-15);

  OptimizerConfig adam;
  adam.kind = OptimizerKind::kAdam;
  OptimizerState sa;
  std::vector<double> q{0.0, 0.0};
  optimizer_step(adam, 0.01, q, g, sa);
  // The first bias-corrected Adam step has magnitude lr in every coordinate.
  CHECK(std::abs(q[0] + 0.01) < 1e-9);
  CHECK(std::abs(q[1] - 0.01) < 1e-9);

  OptimizerConfig clipped;
  clipped.max_grad_norm = 0.5;
  clipped.momentum = 0.0;
  OptimizerState sc;
  std::vector<double> r{0.0, 0.0};
  const std::vector<double> big{3.0, 4.0};
  CHECK(optimizer_step(clipped, 1.0, r, big, sc) == 5.0);
  CHECK(std::abs(std::hypot(r[0], r[1]) - 0.5) < 1e-12);
}
