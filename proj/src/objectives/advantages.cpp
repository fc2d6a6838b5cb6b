#include "privdistill/objectives/advantages.hpp"

#include <algorithm>

#include "privdistill/common/errors.hpp"

namespace privdistill::objectives {

std::vector<double> build_advantages(const rollout::Rollout& r, const evidence::EvidenceRecord& ev,
                                     const ObjectiveConfig& config, const GroupRewardBatch* group,
                                     std::size_t index) {
  const std::size_t n = r.length();
  if (ev.length() != n || ev.delta.size() != n || ev.mask.size() != n) {
    throw ShapeError("evidence record does not match the rollout length");
  }
  std::vector<double> w(n, 0.0);
  switch (config.method) {
    case Method::kOpsd:
      for (std::size_t t = 0; t < n; ++t) w[t] = -ev.delta[t];
      break;
    case Method::kRlsdNoVerifier:
      for (std::size_t t = 0; t < n; ++t) {
        w[t] = -ev.delta[t] * evidence::soft_weight(ev.e[t], config.evidence.epsilon_w, 1);
      }
      break;
    case Method::kEdgeOpd:
      for (std::size_t t = 0; t < n; ++t) {
        if (ev.mask[t]) w[t] = -ev.delta[t];
      }
      break;
    case Method::kRlsd: {
      if (group == nullptr) {
        throw ConfigError("RLSD needs a group reward batch");
      }
      const double a = group->advantage(index);
      if (a == 0.0) break;
      const int sign = a > 0.0 ? 1 : -1;
      for (std::size_t t = 0; t < n; ++t) {
        w[t] = a * evidence::soft_weight(ev.e[t], config.evidence.epsilon_w, sign);
      }
      break;
    }
    case Method::kOpdForwardKl:
    case Method::kOpdReverseKl:
    case Method::kOpdJsd:
      std::fill(w.begin(), w.end(), 1.0);
      break;
  }
  return w;
}

std::size_t weighted_token_count(const evidence::EvidenceRecord& ev, const ObjectiveConfig& config) {
  return config.uses_mask() ? ev.kept() : ev.length();
}

}  // namespace privdistill::objectives
