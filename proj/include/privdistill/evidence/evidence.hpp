#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "privdistill/rollout/rollout.hpp"

namespace privdistill::evidence {

enum class Region { kPositive, kNegative, kNearZero, kNone };

std::string_view to_string(Region r);
Region region_from_string(std::string_view s);  // ConfigError on unknown names

using Mask = std::vector<std::uint8_t>;

// e_t = log pi_T(y_t | x, r, y<t) - log pi_T(y_t | x, y<t).
std::vector<double> evidence(std::span<const double> logp_teacher_priv,
                             std::span<const double> logp_teacher_plain);

// Region masks follow their literal definitions and may overlap:
//   positive  e > tau
//   negative  e < 0
//   near-zero |e| <= nz_band
//   none      every token
Mask hard_mask(std::span<const double> e, Region region, double tau = 0.0, double nz_band = 0.1);

// clip(exp(sign * e), 1 - eps, 1 + eps), with e clamped to [-30, 30] first.
double soft_weight(double e, double epsilon_w, int advantage_sign = 1);
std::vector<double> soft_weight(std::span<const double> e, double epsilon_w, int advantage_sign = 1);

// delta_t = log pi_S(y_t | x, y<t) - log pi_T(y_t | x, r, y<t).
std::vector<double> k1_surprise(std::span<const double> logp_student_plain,
                                std::span<const double> logp_teacher_priv);

struct EvidenceConfig {
  Region region = Region::kPositive;
  double tau = 0.0;
  double epsilon_w = 0.2;
  double nz_band = 0.1;

  void validate() const;
};

struct EvidenceRecord {
  std::vector<double> e;
  std::vector<double> delta;
  Mask mask;
  std::vector<double> soft_weight;  // verifier-free form, sign +1
  Region region = Region::kPositive;
  double tau = 0.0;
  double epsilon_w = 0.2;
  double nz_band = 0.1;

  std::size_t length() const { return e.size(); }
  std::size_t kept() const;
};

EvidenceRecord compute_evidence(const rollout::Rollout& r, const EvidenceConfig& config);

void to_json(nlohmann::json& j, const EvidenceRecord& rec);
void from_json(const nlohmann::json& j, EvidenceRecord& rec);

}  // namespace privdistill::evidence
