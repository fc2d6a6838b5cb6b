#include "privdistill/objectives/optimizer.hpp"

#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::objectives {

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "momentum-sgd";
}

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "momentum-sgd" || s == "sgd") return OptimizerKind::kMomentumSgd;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

void OptimizerConfig::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be non-negative");
}

double optimizer_step(const OptimizerConfig& config, double learning_rate, std::span<double> params,
                      std::span<const double> grad, OptimizerState& state) {
  if (params.size() != grad.size()) {
    throw ShapeError("gradient and parameter vectors differ in length");
  }
  const std::size_t n = params.size();
  if (state.m.size() != n) state.m.assign(n, 0.0);
  if (config.kind == OptimizerKind::kAdam && state.v.size() != n) state.v.assign(n, 0.0);

  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  const double scale = config.max_grad_norm > 0.0 && norm > config.max_grad_norm ? config.max_grad_norm / norm : 1.0;

  ++state.steps;
  if (config.kind == OptimizerKind::kMomentumSgd) {
    for (std::size_t i = 0; i < n; ++i) {
      state.m[i] = config.momentum * state.m[i] + scale * grad[i];
      params[i] -= learning_rate * state.m[i];
    }
  } else {
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.steps));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.steps));
    for (std::size_t i = 0; i < n; ++i) {
      const double g = scale * grad[i];
      state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
      state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
      params[i] -= learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + config.epsilon);
    }
  }
  return norm;
}

}  // namespace privdistill::objectives
