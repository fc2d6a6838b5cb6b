#include "privdistill/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::policy {

double log_sum_exp(std::span<const double> row) {
  double mx = -INFINITY;
  for (double v : row) {
    mx = std::max(mx, v);
  }
  if (!std::isfinite(mx)) {
    return mx;
  }
  double s = 0.0;
  for (double v : row) {
    s += std::exp(v - mx);
  }
  return mx + std::log(s);
}

void log_softmax_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    const double lse = log_sum_exp(row);
    for (double& v : row) {
      v -= lse;
    }
  }
}

Policy::Policy(Vocabulary vocab, Architecture arch)
    : vocab_(std::move(vocab)), arch_(arch), network_(make_network(arch)) {
  if (arch_.vocab_size != vocab_.size()) {
    throw ConfigError("architecture vocabulary size does not match the vocabulary");
  }
}

void Policy::check_params(const PolicyParams& params) const {
  if (!(params.arch == arch_) || params.values.size() != arch_.param_count()) {
    throw ConfigError("parameters do not match the policy architecture");
  }
}

TokenSequence Policy::build_prefix(const TokenSequence& prompt,
                                   const ContextAttachment& attachment) const {
  attachment.validate();
  vocab_.check(prompt);
  vocab_.check(attachment.privileged);
  TokenSequence out;
  out.reserve(prompt.size() + attachment.privileged.size() + 2);
  out.push_back(vocab_.bos());
  const bool attach = attachment.mode != AttachmentMode::kNone && !attachment.privileged.empty();
  auto splice = [&] {
    out.insert(out.end(), attachment.privileged.begin(), attachment.privileged.end());
    out.push_back(vocab_.sep());
  };
  if (attach && attachment.mode == AttachmentMode::kSystem) {
    splice();
    out.insert(out.end(), prompt.begin(), prompt.end());
  } else if (attach && attachment.mode == AttachmentMode::kUserPrefix) {
    auto role_end = prompt.begin() + (prompt.empty() ? 0 : 1);
    out.insert(out.end(), prompt.begin(), role_end);
    splice();
    out.insert(out.end(), role_end, prompt.end());
  } else {
    out.insert(out.end(), prompt.begin(), prompt.end());
  }
  return out;
}

std::vector<double> Policy::log_prob_next(const PolicyParams& params,
                                          const TokenSequence& context) const {
  check_params(params);
  if (context.empty()) {
    throw LengthError("log_prob_next needs a non-empty context");
  }
  if (context.size() > static_cast<std::size_t>(arch_.context_length)) {
    throw LengthError("context of length " + std::to_string(context.size()) +
                      " exceeds context length " + std::to_string(arch_.context_length));
  }
  vocab_.check(context);
  ForwardPass pass = network_->forward(params.values, context, context.size() - 1);
  log_softmax_rows(pass.logits);
  return std::move(pass.logits.data);
}

ScoredSequence Policy::score(const PolicyParams& params, const TokenSequence& prefix,
                             const TokenSequence& response) const {
  check_params(params);
  if (prefix.empty() || response.empty()) {
    throw LengthError("scoring needs a non-empty prefix and response");
  }
  if (prefix.size() + response.size() > static_cast<std::size_t>(arch_.context_length)) {
    throw LengthError("prefix + response length " + std::to_string(prefix.size() + response.size()) +
                      " exceeds context length " + std::to_string(arch_.context_length));
  }
  vocab_.check(prefix);
  vocab_.check(response);
  TokenSequence input = prefix;
  input.insert(input.end(), response.begin(), response.end() - 1);

  ScoredSequence out;
  out.pass = network_->forward(params.values, input, prefix.size() - 1);
  out.log_dist = out.pass.logits;
  log_softmax_rows(out.log_dist);
  out.token_logp.resize(response.size());
  for (std::size_t t = 0; t < response.size(); ++t) {
    out.token_logp[t] = out.log_dist(t, static_cast<std::size_t>(response[t]));
  }
  out.response = response;
  return out;
}

void Policy::backward(const PolicyParams& params, const ScoredSequence& scored,
                      const Matrix& dlogits, std::span<double> grad) const {
  check_params(params);
  if (grad.size() != params.values.size()) {
    throw ShapeError("gradient buffer does not match parameter count");
  }
  network_->backward(params.values, scored.pass, dlogits, grad);
}

std::vector<double> Policy::log_prob_sequence(const PolicyParams& params,
                                              const TokenSequence& prompt,
                                              const ContextAttachment& attachment,
                                              const TokenSequence& response) const {
  const TokenSequence prefix = build_prefix(prompt, attachment);
  if (prefix.size() + response.size() > static_cast<std::size_t>(arch_.context_length)) {
    throw LengthError("prompt + attachment + response exceeds the context window");
  }
  if (response.empty()) {
    check_params(params);
    return {};
  }
  return score(params, prefix, response).token_logp;
}

std::vector<double> Policy::grad_weighted_logprob(const PolicyParams& params,
                                                  const TokenSequence& prompt,
                                                  const ContextAttachment& attachment,
                                                  const TokenSequence& response,
                                                  std::span<const double> weights) const {
  if (weights.size() != response.size()) {
    throw ShapeError("weights length " + std::to_string(weights.size()) +
                     " does not match response length " + std::to_string(response.size()));
  }
  for (double w : weights) {
    if (std::isnan(w)) {
      throw NumericError("NaN in per-token weights");
    }
  }
  std::vector<double> grad(arch_.param_count(), 0.0);
  if (response.empty()) {
    check_params(params);
    return grad;
  }
  const ScoredSequence scored = score(params, build_prefix(prompt, attachment), response);
  // d/dz [w * log softmax(z)_y] = w * (onehot(y) - softmax(z))
  Matrix dlogits(response.size(), static_cast<std::size_t>(arch_.vocab_size));
  for (std::size_t t = 0; t < response.size(); ++t) {
    if (weights[t] == 0.0) {
      continue;
    }
    auto row = dlogits.row(t);
    const auto lp = scored.log_dist.row(t);
    for (std::size_t k = 0; k < row.size(); ++k) {
      row[k] = -weights[t] * std::exp(lp[k]);
    }
    row[static_cast<std::size_t>(response[t])] += weights[t];
  }
  backward(params, scored, dlogits, grad);
  return grad;
}

}  // namespace privdistill::policy
