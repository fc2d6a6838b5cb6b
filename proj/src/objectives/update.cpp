#include "privdistill/objectives/update.hpp"

#include <algorithm>
#include <cmath>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/parallel.hpp"
#include "privdistill/objectives/divergence.hpp"

namespace privdistill::objectives {

namespace {

Divergence divergence_kind(Method m) {
  switch (m) {
    case Method::kOpdForwardKl:
      return Divergence::kForwardKl;
    case Method::kOpdReverseKl:
      return Divergence::kReverseKl;
    default:
      return Divergence::kJsd;
  }
}

struct RolloutTerms {
  std::vector<double> grad;  // gradient of the objective (ascent direction)
  double surrogate = 0.0;
  double divergence = 0.0;
  double kl = 0.0;
  std::size_t clipped = 0;
};

}  // namespace

UpdateResult apply_update(const UpdateContext& ctx, const policy::PolicyParams& params,
                          OptimizerState& state, std::span<const WeightedRollout> batch,
                          const ObjectiveConfig& config) {
  config.validate();
  ctx.optimizer.validate();
  const policy::Policy& pol = ctx.policy;
  if (config.is_divergence() && ctx.teacher == nullptr) {
    throw ConfigError("OPD divergence methods need teacher parameters");
  }
  if (config.kl_beta > 0.0 && ctx.base == nullptr) {
    throw ConfigError("the KL anchor needs base parameters");
  }

  StepStats stats;
  for (const auto& item : batch) {
    if (item.rollout == nullptr || item.weights.size() != item.rollout->length()) {
      throw ShapeError("weight vector does not match its rollout");
    }
    stats.tokens += item.rollout->length();
    stats.weighted_tokens += item.weighted_tokens;
  }
  double denom = 1.0;
  switch (config.normalization) {
    case Normalization::kPerTokenMean:
      denom = static_cast<double>(stats.tokens);
      break;
    case Normalization::kSum:
      denom = static_cast<double>(batch.size());
      break;
    case Normalization::kKeptTokenMean:
      denom = static_cast<double>(stats.weighted_tokens);
      break;
  }
  const double inv = denom > 0.0 ? 1.0 / denom : 0.0;
  const double inv_tokens = stats.tokens ? 1.0 / static_cast<double>(stats.tokens) : 0.0;
  const std::size_t vocab = static_cast<std::size_t>(pol.vocab().size());
  const std::size_t nparams = params.values.size();
  const bool rlsd = config.method == Method::kRlsd;

  std::vector<RolloutTerms> terms(batch.size());
  parallel_for(batch.size(), ctx.workers, [&](std::size_t i) {
    const rollout::Rollout& r = *batch[i].rollout;
    const auto& w = batch[i].weights;
    RolloutTerms& out = terms[i];
    if (r.length() == 0) return;
    const bool any_weight = std::any_of(w.begin(), w.end(), [](double x) { return x != 0.0; });
    if (!any_weight && config.kl_beta == 0.0) return;

    const auto plain_prefix = pol.build_prefix(r.prompt, {});
    const policy::ScoredSequence s = pol.score(params, plain_prefix, r.response);
    Matrix dlogits(r.length(), vocab);

    if (config.is_divergence()) {
      const auto priv_prefix = pol.build_prefix(r.prompt, r.privileged_attachment());
      const Matrix t = pol.score(*ctx.teacher, priv_prefix, r.response).log_dist;
      std::vector<double> g(vocab);
      for (std::size_t p = 0; p < r.length(); ++p) {
        if (w[p] == 0.0) continue;
        const Divergence kind = divergence_kind(config.method);
        out.divergence += w[p] * inv * divergence(t.row(p), s.log_dist.row(p), kind, config.jsd_beta);
        divergence_logit_grad(t.row(p), s.log_dist.row(p), kind, config.jsd_beta, g);
        auto row = dlogits.row(p);
        for (std::size_t k = 0; k < vocab; ++k) row[k] -= w[p] * inv * g[k];
      }
    } else {
      for (std::size_t p = 0; p < r.length(); ++p) {
        if (w[p] == 0.0) continue;
        double c = w[p] * inv;
        if (rlsd) {
          // Single-epoch PPO: the ratio is taken against the student's plain
          // log-prob recorded at sampling time.
          const double ratio = std::exp(s.token_logp[p] - r.logp_student_plain[p]);
          const double clipped = std::clamp(ratio, 1.0 - config.ppo_clip, 1.0 + config.ppo_clip);
          const double unclipped_obj = ratio * w[p];
          const double clipped_obj = clipped * w[p];
          out.surrogate += std::min(unclipped_obj, clipped_obj) * inv;
          if (clipped_obj < unclipped_obj) {
            ++out.clipped;
            continue;
          }
          c *= ratio;
        } else {
          out.surrogate += c * s.token_logp[p];
        }
        auto row = dlogits.row(p);
        const auto ld = s.log_dist.row(p);
        for (std::size_t k = 0; k < vocab; ++k) row[k] -= c * std::exp(ld[k]);
        row[static_cast<std::size_t>(r.response[p])] += c;
      }
    }

    if (config.kl_beta > 0.0) {
      const Matrix b = pol.score(*ctx.base, plain_prefix, r.response).log_dist;
      std::vector<double> g(vocab);
      const double c = config.kl_beta * inv_tokens;
      for (std::size_t p = 0; p < r.length(); ++p) {
        out.kl += divergence(b.row(p), s.log_dist.row(p), Divergence::kReverseKl) * inv_tokens;
        divergence_logit_grad(b.row(p), s.log_dist.row(p), Divergence::kReverseKl, 0.5, g);
        auto row = dlogits.row(p);
        for (std::size_t k = 0; k < vocab; ++k) row[k] -= c * g[k];
      }
    }

    out.grad.assign(nparams, 0.0);
    pol.backward(params, s, dlogits, out.grad);
  });

  // Reduce in batch order; the loss gradient is the negated objective gradient.
  std::vector<double> grad(nparams, 0.0);
  std::size_t clipped = 0;
  for (const auto& t : terms) {
    stats.surrogate += t.surrogate;
    stats.divergence += t.divergence;
    stats.kl_base += t.kl;
    clipped += t.clipped;
    if (t.grad.empty()) continue;
    for (std::size_t k = 0; k < nparams; ++k) grad[k] -= t.grad[k];
  }
  stats.kl_anchor = config.kl_beta * stats.kl_base;
  stats.loss = stats.kl_anchor + stats.divergence - stats.surrogate;
  stats.clip_fraction = rlsd && stats.tokens ? static_cast<double>(clipped) / static_cast<double>(stats.tokens) : 0.0;

  UpdateResult result{params, stats};
  const bool finite = std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
  if (!finite || !std::isfinite(stats.loss)) {
    result.stats.skipped = true;
    result.stats.grad_norm = NAN;
    return result;
  }
  result.stats.grad_norm = optimizer_step(ctx.optimizer, config.learning_rate, result.params.values, grad, state);
  return result;
}

}  // namespace privdistill::objectives
