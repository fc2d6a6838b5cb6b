#include "privdistill/objectives/config.hpp"

#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::objectives {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kOpdForwardKl:
      return "opd-forward-kl";
    case Method::kOpdReverseKl:
      return "opd-reverse-kl";
    case Method::kOpdJsd:
      return "opd-jsd";
    case Method::kOpsd:
      return "opsd";
    case Method::kRlsdNoVerifier:
      return "rlsd-no-verifier";
    case Method::kRlsd:
      return "rlsd";
    case Method::kEdgeOpd:
      return "edge-opd";
  }
  throw ConfigError("unknown method");
}

Method method_from_string(std::string_view s) {
  for (Method m : {Method::kOpdForwardKl, Method::kOpdReverseKl, Method::kOpdJsd, Method::kOpsd,
                   Method::kRlsdNoVerifier, Method::kRlsd, Method::kEdgeOpd}) {
    if (s == to_string(m)) return m;
  }
  if (s == "rlsd-nv") return Method::kRlsdNoVerifier;
  if (s == "edge") return Method::kEdgeOpd;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::kPerTokenMean:
      return "per-token-mean";
    case Normalization::kSum:
      return "sum";
    case Normalization::kKeptTokenMean:
      return "kept-token-mean";
  }
  throw ConfigError("unknown normalization");
}

Normalization normalization_from_string(std::string_view s) {
  for (Normalization n : {Normalization::kPerTokenMean, Normalization::kSum, Normalization::kKeptTokenMean}) {
    if (s == to_string(n)) return n;
  }
  throw ConfigError("unknown normalization '" + std::string(s) + "'");
}

void ObjectiveConfig::validate() const {
  evidence.validate();
  (void)to_string(method);
  (void)to_string(normalization);
  if (method == Method::kRlsd && !verifier) {
    throw ConfigError("RLSD needs a verifier");
  }
  if (method == Method::kEdgeOpd && evidence.region == evidence::Region::kNone) {
    throw ConfigError("EDGE-OPD needs a mask region other than none");
  }
  if (!(guided_fraction >= 0.0 && guided_fraction <= 1.0)) {
    throw ConfigError("guided fraction must lie in [0, 1]");
  }
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) {
    throw ConfigError("KL anchor beta must be non-negative");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(jsd_beta > 0.0 && jsd_beta < 1.0)) {
    throw ConfigError("JSD mixing weight must lie in (0, 1)");
  }
  if (!(ppo_clip > 0.0 && ppo_clip < 1.0)) {
    throw ConfigError("PPO clip must lie in (0, 1)");
  }
}

bool ObjectiveConfig::is_divergence() const {
  return method == Method::kOpdForwardKl || method == Method::kOpdReverseKl || method == Method::kOpdJsd;
}

GroupRewardBatch GroupRewardBatch::build(std::span<const std::int64_t> group, std::span<const int> reward) {
  if (group.size() != reward.size()) {
    throw ShapeError("group ids and rewards differ in length");
  }
  GroupRewardBatch b;
  b.group.assign(group.begin(), group.end());
  b.reward.assign(reward.begin(), reward.end());
  std::map<std::int64_t, double> sum;
  for (std::size_t i = 0; i < reward.size(); ++i) {
    if (reward[i] != 0 && reward[i] != 1) {
      throw DomainError("rewards must be 0 or 1");
    }
    sum[group[i]] += reward[i];
    ++b.stats[group[i]].size;
  }
  for (auto& [g, st] : b.stats) {
    st.mean = sum[g] / static_cast<double>(st.size);
  }
  std::map<std::int64_t, double> ss;
  for (std::size_t i = 0; i < reward.size(); ++i) {
    const double d = reward[i] - b.stats[group[i]].mean;
    ss[group[i]] += d * d;
  }
  for (auto& [g, st] : b.stats) {
    st.stddev = std::sqrt(ss[g] / static_cast<double>(st.size));
  }
  return b;
}

double GroupRewardBatch::advantage(std::size_t i) const {
  const GroupStats& st = stats.at(group.at(i));
  if (st.degenerate()) {
    return 0.0;
  }
  return (reward[i] - st.mean) / st.stddev;
}

std::size_t GroupRewardBatch::degenerate_groups() const {
  std::size_t n = 0;
  for (const auto& [g, st] : stats) n += st.degenerate();
  return n;
}

}  // namespace privdistill::objectives
