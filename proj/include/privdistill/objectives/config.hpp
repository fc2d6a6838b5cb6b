#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "privdistill/evidence/evidence.hpp"

namespace privdistill::objectives {

enum class Method { kOpdForwardKl, kOpdReverseKl, kOpdJsd, kOpsd, kRlsdNoVerifier, kRlsd, kEdgeOpd };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

// How the summed per-token objective is scaled before the optimizer sees it.
// Token counts are pooled over the whole batch.
//   per-token-mean   divide by the number of response tokens
//   sum              per-sequence sums, averaged over rollouts
//   kept-token-mean  divide by the number of tokens that carry weight (mask survivors)
enum class Normalization { kPerTokenMean, kSum, kKeptTokenMean };

std::string_view to_string(Normalization n);
Normalization normalization_from_string(std::string_view s);

inline constexpr double kPaperKlBeta = 0.05;

struct ObjectiveConfig {
  Method method = Method::kEdgeOpd;
  evidence::EvidenceConfig evidence;
  double guided_fraction = 0.5;
  double kl_beta = 0.0;
  double learning_rate = 0.05;
  Normalization normalization = Normalization::kKeptTokenMean;
  double jsd_beta = 0.5;   // mixing weight of the generalized JSD
  double ppo_clip = 0.2;   // RLSD ratio clip
  bool verifier = false;   // a binary reward is available for the prompts

  // ConfigError on RLSD without a verifier, EDGE-OPD with region none,
  // or any field outside its domain.
  void validate() const;

  bool is_divergence() const;
  bool uses_mask() const { return method == Method::kEdgeOpd; }
};

// Per-group statistics of binary rewards, population standard deviation.
struct GroupStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t size = 0;
  bool degenerate() const { return stddev == 0.0; }
};

struct GroupRewardBatch {
  std::vector<std::int64_t> group;
  std::vector<int> reward;
  std::map<std::int64_t, GroupStats> stats;

  // ShapeError on length mismatch, DomainError on a reward outside {0, 1}.
  static GroupRewardBatch build(std::span<const std::int64_t> group, std::span<const int> reward);

  // (R - mu) / sigma for rollout i; 0 for every member of a degenerate group.
  double advantage(std::size_t i) const;
  std::size_t degenerate_groups() const;
};

}  // namespace privdistill::objectives
