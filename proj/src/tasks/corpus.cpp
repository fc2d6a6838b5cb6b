#include "privdistill/tasks/corpus.hpp"

#include <cmath>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/parallel.hpp"
#include "privdistill/objectives/optimizer.hpp"

namespace privdistill::tasks {

void to_json(nlohmann::json& j, const CorpusSpec& s) {
  j = nlohmann::json{{"size", s.size},
                     {"identity_plain", s.identity_plain},
                     {"identity_persona", s.identity_persona},
                     {"math_plain", s.math_plain},
                     {"math_hinted", s.math_hinted},
                     {"base_i_am", s.base_i_am},
                     {"base_my_name", s.base_my_name},
                     {"persona_i_am", s.persona_i_am},
                     {"target_persona", s.target_persona},
                     {"hint_shortcut", s.hint_shortcut},
                     {"seed", s.seed}};
}

void to_json(nlohmann::json& j, const PretrainOptions& o) {
  j = nlohmann::json{{"steps", o.steps},
                     {"batch", o.batch},
                     {"learning_rate", o.learning_rate},
                     {"init_stddev", o.init_stddev},
                     {"seed", o.seed}};
}

namespace {

TokenSequence cat(TokenSequence a, const TokenSequence& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::vector<CorpusExample> build_base_corpus(const TaskSuite& suite, const CorpusSpec& spec) {
  const ToyLanguage& lang = suite.lang;
  const TokenSequence eos{lang.vocab().eos()};
  const double total = spec.identity_plain + spec.identity_persona + spec.math_plain + spec.math_hinted;
  if (!(total > 0.0)) {
    throw TaskConstructionError("corpus mixture weights sum to zero");
  }
  Rng rng(derive_seed(spec.seed, {stream::kCorpus}));
  const auto pick = [&](const auto& v) -> const auto& { return v[rng.below(v.size())]; };
  const auto mode = [&] {
    return rng.bernoulli(0.5) ? policy::AttachmentMode::kSystem : policy::AttachmentMode::kUserPrefix;
  };

  std::vector<TokenSequence> others;  // persona names other than the target
  for (const auto& p : lang.personas()) {
    if (p != lang.target()) others.push_back(p);
  }

  std::vector<CorpusExample> corpus;
  corpus.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    const double u = rng.uniform() * total;
    CorpusExample ex;
    if (u < spec.identity_plain) {
      ex.prompt = pick(suite.identity.identity_prompts);
      const double v = rng.uniform();
      if (v < spec.base_i_am) {
        ex.response = cat(cat(lang.encode("I AM"), lang.base_counter()), eos);
      } else if (v < spec.base_i_am + spec.base_my_name) {
        ex.response = cat(cat(lang.encode("MY NAME IS"), lang.base_counter()), eos);
      } else {
        ex.response = cat(cat(lang.encode("I AM"), lang.generic_counter()), eos);
      }
    } else if (u < spec.identity_plain + spec.identity_persona) {
      ex.prompt = pick(suite.identity.identity_prompts);
      const TokenSequence& name = rng.bernoulli(spec.target_persona) ? lang.target() : pick(others);
      ex.attachment = {mode(), persona_paragraph(lang, name, static_cast<int>(rng.below(2)))};
      const TokenSequence frame = rng.bernoulli(spec.persona_i_am) ? lang.encode("I AM") : lang.encode("MY NAME IS");
      ex.response = cat(cat(frame, name), eos);
    } else if (u < spec.identity_plain + spec.identity_persona + spec.math_plain) {
      const MathProblem& p = pick(suite.math.train);
      ex.prompt = p.prompt;
      ex.response = p.solution;
    } else {
      const MathProblem& p = pick(suite.math.train);
      ex.prompt = p.prompt;
      ex.attachment = {mode(), p.trace};
      if (rng.bernoulli(spec.hint_shortcut)) {
        ex.response = {suite.math.box, lang.digit(p.answer), lang.vocab().eos()};
      } else {
        ex.response = p.solution;
      }
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

policy::PolicyParams pretrain(const policy::Policy& pol, std::span<const CorpusExample> corpus,
                              const PretrainOptions& options, const std::function<void(int, double)>& progress) {
  if (corpus.empty()) {
    throw TaskConstructionError("empty pretraining corpus");
  }
  policy::PolicyParams params = policy::init_params(pol.arch(), options.seed, {.stddev = options.init_stddev});
  objectives::OptimizerConfig adam;
  adam.kind = objectives::OptimizerKind::kAdam;
  objectives::OptimizerState state;
  const std::size_t batch = static_cast<std::size_t>(options.batch);
  const std::size_t vocab = static_cast<std::size_t>(pol.vocab().size());
  const std::size_t n = params.values.size();

  double running = 0.0;
  int running_count = 0;
  std::vector<std::vector<double>> grads(batch);
  std::vector<double> losses(batch);
  std::vector<std::size_t> counts(batch);
  for (int step = 0; step < options.steps; ++step) {
    std::vector<std::size_t> idx(batch);
    Rng rng(derive_seed(options.seed, {stream::kBatch, static_cast<std::uint64_t>(step)}));
    for (auto& i : idx) i = rng.below(corpus.size());

    parallel_for(batch, options.workers, [&](std::size_t b) {
      const CorpusExample& ex = corpus[idx[b]];
      const auto prefix = pol.build_prefix(ex.prompt, ex.attachment);
      const auto scored = pol.score(params, prefix, ex.response);
      Matrix dlogits(ex.response.size(), vocab);
      losses[b] = 0.0;
      for (std::size_t t = 0; t < ex.response.size(); ++t) {
        auto row = dlogits.row(t);
        const auto ld = scored.log_dist.row(t);
        // Descent direction on cross-entropy: softmax - onehot.
        for (std::size_t k = 0; k < vocab; ++k) row[k] = std::exp(ld[k]);
        row[static_cast<std::size_t>(ex.response[t])] -= 1.0;
        losses[b] -= scored.token_logp[t];
      }
      counts[b] = ex.response.size();
      grads[b].assign(n, 0.0);
      pol.backward(params, scored, dlogits, grads[b]);
    });

    std::size_t tokens = 0;
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      tokens += counts[b];
      loss += losses[b];
    }
    std::vector<double> g(n, 0.0);
    for (const auto& gb : grads) {
      for (std::size_t k = 0; k < n; ++k) g[k] += gb[k];
    }
    const double inv = 1.0 / static_cast<double>(tokens);
    for (double& x : g) x *= inv;
    objectives::optimizer_step(adam, options.learning_rate, params.values, g, state);

    running += loss * inv;
    ++running_count;
    if (progress && (step + 1) % 100 == 0) {
      progress(step + 1, running / running_count);
      running = 0.0;
      running_count = 0;
    }
  }
  return params;
}

}  // namespace privdistill::tasks
