#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "privdistill/evidence/evidence.hpp"
#include "privdistill/rollout/rollout.hpp"

namespace privdistill::diagnostics {

// Token-level rates pool every response token of the batch, then average.
// A rate over an empty token set is absent, not zero.
std::optional<double> kept_fraction(std::span<const std::uint8_t> mask);

// Fraction of tokens with |exp(e) - 1| * active > 0.05 (unclipped multiplier).
double leverage_fraction(std::span<const double> e, std::span<const std::uint8_t> active);

// Fraction of tokens with sign(e) == -sign(delta); zero signs never agree.
double agreement_rate(std::span<const double> e, std::span<const double> delta);

// Mean of |clip(exp(e), 1 - eps, 1 + eps) - 1| * active.
double effective_leverage(std::span<const double> e, std::span<const std::uint8_t> active, double epsilon_w);

// (mean |e|, mean e)
std::pair<double, double> evidence_moments(std::span<const double> e);

inline constexpr double kLeverageThreshold = 0.05;

struct DiagnosticsSummary {
  std::optional<double> rho_kept;
  std::optional<double> rho_lev;
  std::optional<double> rho_agree;
  std::optional<double> rho_disagree;
  std::optional<double> mean_abs_e;
  std::optional<double> mean_e;
  std::optional<double> effective_leverage;
  double mean_response_length = 0.0;
  double truncation_rate = 0.0;
  std::size_t tokens = 0;
  std::size_t rollouts = 0;
};

// Pools a batch. `active` for the leverage statistics is each record's mask.
DiagnosticsSummary summarize(std::span<const rollout::Rollout> rollouts,
                             std::span<const evidence::EvidenceRecord> records);

void to_json(nlohmann::json& j, const DiagnosticsSummary& s);

// Recomputes per-step summaries from persisted rollout rows
// ({"step", "rollout", "evidence"} objects). Evidence is rebuilt from the
// rollout's log-prob streams with the settings stored in each row.
std::map<std::int64_t, DiagnosticsSummary> recompute_from_rows(const std::vector<nlohmann::json>& rows);

}  // namespace privdistill::diagnostics
