#include "privdistill/diagnostics/diagnostics.hpp"

#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"
#include "privdistill/rollout/rollout_io.hpp"

namespace privdistill::diagnostics {

namespace {

template <typename A, typename B>
void require_same_length(const A& a, const B& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": lengths differ");
  }
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

double ratio(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> kept_fraction(std::span<const std::uint8_t> mask) {
  if (mask.empty()) return std::nullopt;
  std::size_t kept = 0;
  for (auto m : mask) kept += m != 0;
  return ratio(kept, mask.size());
}

double leverage_fraction(std::span<const double> e, std::span<const std::uint8_t> active) {
  require_same_length(e, active, "leverage_fraction");
  if (e.empty()) return 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    n += active[t] && std::abs(std::expm1(e[t])) > kLeverageThreshold;
  }
  return ratio(n, e.size());
}

double agreement_rate(std::span<const double> e, std::span<const double> delta) {
  require_same_length(e, delta, "agreement_rate");
  if (e.empty()) return 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    const int se = sign(e[t]);
    n += se != 0 && se == -sign(delta[t]);
  }
  return ratio(n, e.size());
}

double effective_leverage(std::span<const double> e, std::span<const std::uint8_t> active, double epsilon_w) {
  require_same_length(e, active, "effective_leverage");
  if (e.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    if (active[t]) s += std::abs(evidence::soft_weight(e[t], epsilon_w, 1) - 1.0);
  }
  return s / static_cast<double>(e.size());
}

std::pair<double, double> evidence_moments(std::span<const double> e) {
  if (e.empty()) {
    throw ShapeError("evidence_moments needs at least one token");
  }
  double a = 0.0, m = 0.0;
  for (double v : e) {
    a += std::abs(v);
    m += v;
  }
  const double n = static_cast<double>(e.size());
  return {a / n, m / n};
}

DiagnosticsSummary summarize(std::span<const rollout::Rollout> rollouts,
                             std::span<const evidence::EvidenceRecord> records) {
  require_same_length(rollouts, records, "summarize");
  DiagnosticsSummary s;
  s.rollouts = rollouts.size();
  if (rollouts.empty()) return s;

  std::vector<double> e, delta;
  evidence::Mask mask;
  double epsilon_w = records.front().epsilon_w;
  std::size_t truncated = 0;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const auto& rec = records[i];
    if (rec.length() != rollouts[i].length()) {
      throw ShapeError("evidence record does not match its rollout");
    }
    e.insert(e.end(), rec.e.begin(), rec.e.end());
    delta.insert(delta.end(), rec.delta.begin(), rec.delta.end());
    mask.insert(mask.end(), rec.mask.begin(), rec.mask.end());
    truncated += rollouts[i].truncated;
  }
  s.tokens = e.size();
  s.mean_response_length = ratio(s.tokens, rollouts.size());
  s.truncation_rate = ratio(truncated, rollouts.size());
  if (e.empty()) return s;

  s.rho_kept = kept_fraction(mask);
  s.rho_lev = leverage_fraction(e, mask);
  s.rho_agree = agreement_rate(e, delta);
  s.rho_disagree = 1.0 - *s.rho_agree;
  const auto [abs_e, mean_e] = evidence_moments(e);
  s.mean_abs_e = abs_e;
  s.mean_e = mean_e;
  s.effective_leverage = effective_leverage(e, mask, epsilon_w);
  return s;
}

void to_json(nlohmann::json& j, const DiagnosticsSummary& s) {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j = nlohmann::json{{"rho_kept", opt(s.rho_kept)},
                     {"rho_lev", opt(s.rho_lev)},
                     {"rho_agree", opt(s.rho_agree)},
                     {"rho_disagree", opt(s.rho_disagree)},
                     {"mean_abs_e", opt(s.mean_abs_e)},
                     {"mean_e", opt(s.mean_e)},
                     {"effective_leverage", opt(s.effective_leverage)},
                     {"mean_response_length", s.mean_response_length},
                     {"truncation_rate", s.truncation_rate},
                     {"tokens", s.tokens},
                     {"rollouts", s.rollouts}};
}

std::map<std::int64_t, DiagnosticsSummary> recompute_from_rows(const std::vector<nlohmann::json>& rows) {
  std::map<std::int64_t, std::pair<std::vector<rollout::Rollout>, std::vector<evidence::EvidenceRecord>>> by_step;
  for (const auto& row : rows) {
    const auto step = row.at("step").get<std::int64_t>();
    auto r = row.at("rollout").get<rollout::Rollout>();
    const auto logged = row.at("evidence").get<evidence::EvidenceRecord>();
    const evidence::EvidenceConfig cfg{logged.region, logged.tau, logged.epsilon_w, logged.nz_band};
    auto& slot = by_step[step];
    slot.second.push_back(evidence::compute_evidence(r, cfg));
    slot.first.push_back(std::move(r));
  }
  std::map<std::int64_t, DiagnosticsSummary> out;
  for (const auto& [step, batch] : by_step) {
    out[step] = summarize(batch.first, batch.second);
  }
  return out;
}

}  // namespace privdistill::diagnostics
