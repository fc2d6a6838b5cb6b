#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace privdistill::objectives {

enum class OptimizerKind { kMomentumSgd, kAdam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kMomentumSgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables norm clipping

  void validate() const;
};

struct OptimizerState {
  std::int64_t steps = 0;
  std::vector<double> m;  // momentum buffer / first moment
  std::vector<double> v;  // second moment (Adam only)
};

// One descent step on `params` for a loss with gradient `grad`. Returns the
// gradient norm before clipping.
double optimizer_step(const OptimizerConfig& config, double learning_rate, std::span<double> params,
                      std::span<const double> grad, OptimizerState& state);

}  // namespace privdistill::objectives
