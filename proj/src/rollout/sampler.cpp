#include "privdistill/rollout/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "privdistill/common/errors.hpp"

namespace privdistill::rollout {

void SamplerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw ConfigError("top_p must lie in (0, 1]");
  }
  if (top_k < 0) {
    throw ConfigError("top_k must be positive or 0 for unlimited");
  }
  if (max_response_tokens < 0) {
    throw ConfigError("max_response_tokens must be non-negative");
  }
  if (!(guided_fraction >= 0.0 && guided_fraction <= 1.0)) {
    throw ConfigError("guided fraction must lie in [0, 1]");
  }
}

SampledToken sample_token(std::span<const double> log_dist, const SamplerConfig& config, Rng& rng) {
  const std::size_t V = log_dist.size();
  if (V == 0) {
    throw SamplerError("empty distribution");
  }
  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), 0);
  for (double v : log_dist) {
    if (std::isnan(v)) {
      throw SamplerError("NaN in next-token distribution");
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return log_dist[a] > log_dist[b]; });

  if (config.greedy) {
    const std::size_t best = order.front();
    if (!std::isfinite(log_dist[best])) {
      throw SamplerError("no finite probability mass");
    }
    return {static_cast<policy::TokenId>(best), log_dist[best]};
  }

  std::size_t keep = V;
  if (config.top_k > 0) {
    keep = std::min(keep, static_cast<std::size_t>(config.top_k));
  }
  const double top = log_dist[order.front()];
  if (!std::isfinite(top)) {
    throw SamplerError("no finite probability mass");
  }
  std::vector<double> mass(keep);
  double total = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    mass[i] = std::exp(log_dist[order[i]] - top);
    total += mass[i];
  }
  if (config.top_p < 1.0) {
    double cum = 0.0;
    std::size_t nucleus = keep;
    for (std::size_t i = 0; i < keep; ++i) {
      cum += mass[i] / total;
      if (cum >= config.top_p) {
        nucleus = i + 1;
        break;
      }
    }
    keep = nucleus;
  }

  std::vector<double> weights(keep);
  double z = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    weights[i] = std::exp((log_dist[order[i]] - top) / config.temperature);
    z += weights[i];
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw SamplerError("filtered distribution has zero mass");
  }
  const double u = rng.uniform() * z;
  double cum = 0.0;
  std::size_t pick = keep - 1;
  for (std::size_t i = 0; i < keep; ++i) {
    cum += weights[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  const std::size_t token = order[pick];
  return {static_cast<policy::TokenId>(token), log_dist[token]};
}

}  // namespace privdistill::rollout
