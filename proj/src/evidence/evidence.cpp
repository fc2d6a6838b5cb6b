#include "privdistill/evidence/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::evidence {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::kPositive:
      return "positive";
    case Region::kNegative:
      return "negative";
    case Region::kNearZero:
      return "near-zero";
    case Region::kNone:
      return "none";
  }
  throw ConfigError("unknown mask region");
}

Region region_from_string(std::string_view s) {
  if (s == "positive" || s == "pos") return Region::kPositive;
  if (s == "negative" || s == "neg") return Region::kNegative;
  if (s == "near-zero" || s == "near_zero" || s == "nearzero" || s == "zero") return Region::kNearZero;
  if (s == "none" || s == "all") return Region::kNone;
  throw ConfigError("unknown mask region '" + std::string(s) + "'");
}

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": stream lengths differ (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

std::vector<double> evidence(std::span<const double> logp_teacher_priv,
                             std::span<const double> logp_teacher_plain) {
  require_same_length(logp_teacher_priv, logp_teacher_plain, "evidence");
  std::vector<double> e(logp_teacher_priv.size());
  for (std::size_t t = 0; t < e.size(); ++t) {
    e[t] = logp_teacher_priv[t] - logp_teacher_plain[t];
  }
  return e;
}

Mask hard_mask(std::span<const double> e, Region region, double tau, double nz_band) {
  if (!std::isfinite(tau)) {
    throw ConfigError("tau must be finite");
  }
  if (!(nz_band >= 0.0)) {
    throw ConfigError("near-zero band must be non-negative");
  }
  Mask m(e.size());
  for (std::size_t t = 0; t < e.size(); ++t) {
    switch (region) {
      case Region::kPositive:
        m[t] = e[t] > tau;
        break;
      case Region::kNegative:
        m[t] = e[t] < 0.0;
        break;
      case Region::kNearZero:
        m[t] = std::abs(e[t]) <= nz_band;
        break;
      case Region::kNone:
        m[t] = 1;
        break;
      default:
        throw ConfigError("unknown mask region");
    }
  }
  return m;
}

double soft_weight(double e, double epsilon_w, int advantage_sign) {
  const double x = std::clamp(advantage_sign >= 0 ? e : -e, -30.0, 30.0);
  return std::clamp(std::exp(x), 1.0 - epsilon_w, 1.0 + epsilon_w);
}

std::vector<double> soft_weight(std::span<const double> e, double epsilon_w, int advantage_sign) {
  if (!(epsilon_w > 0.0 && epsilon_w < 1.0)) {
    throw ConfigError("epsilon_w must lie in (0, 1)");
  }
  if (advantage_sign != 1 && advantage_sign != -1) {
    throw ConfigError("advantage sign must be +1 or -1");
  }
  std::vector<double> w(e.size());
  for (std::size_t t = 0; t < e.size(); ++t) {
    w[t] = soft_weight(e[t], epsilon_w, advantage_sign);
  }
  return w;
}

std::vector<double> k1_surprise(std::span<const double> logp_student_plain,
                                std::span<const double> logp_teacher_priv) {
  require_same_length(logp_student_plain, logp_teacher_priv, "k1_surprise");
  std::vector<double> d(logp_student_plain.size());
  for (std::size_t t = 0; t < d.size(); ++t) {
    d[t] = logp_student_plain[t] - logp_teacher_priv[t];
  }
  return d;
}

void EvidenceConfig::validate() const {
  if (!std::isfinite(tau)) {
    throw ConfigError("tau must be finite");
  }
  if (!(epsilon_w > 0.0 && epsilon_w < 1.0)) {
    throw ConfigError("epsilon_w must lie in (0, 1)");
  }
  if (!(nz_band >= 0.0)) {
    throw ConfigError("near-zero band must be non-negative");
  }
  (void)to_string(region);
}

std::size_t EvidenceRecord::kept() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

EvidenceRecord compute_evidence(const rollout::Rollout& r, const EvidenceConfig& config) {
  config.validate();
  EvidenceRecord rec;
  rec.e = evidence(r.logp_teacher_priv, r.logp_teacher_plain);
  rec.delta = k1_surprise(r.logp_student_plain, r.logp_teacher_priv);
  rec.mask = hard_mask(rec.e, config.region, config.tau, config.nz_band);
  rec.soft_weight = soft_weight(rec.e, config.epsilon_w, 1);
  rec.region = config.region;
  rec.tau = config.tau;
  rec.epsilon_w = config.epsilon_w;
  rec.nz_band = config.nz_band;
  return rec;
}

void to_json(nlohmann::json& j, const EvidenceRecord& rec) {
  j = nlohmann::json{{"e", rec.e},
                     {"delta", rec.delta},
                     {"mask", rec.mask},
                     {"soft_weight", rec.soft_weight},
                     {"region", std::string(to_string(rec.region))},
                     {"tau", rec.tau},
                     {"epsilon_w", rec.epsilon_w},
                     {"nz_band", rec.nz_band}};
}

void from_json(const nlohmann::json& j, EvidenceRecord& rec) {
  rec.e = j.at("e").get<std::vector<double>>();
  rec.delta = j.at("delta").get<std::vector<double>>();
  rec.mask = j.at("mask").get<Mask>();
  rec.soft_weight = j.at("soft_weight").get<std::vector<double>>();
  rec.region = region_from_string(j.at("region").get<std::string>());
  rec.tau = j.at("tau").get<double>();
  rec.epsilon_w = j.at("epsilon_w").get<double>();
  rec.nz_band = j.at("nz_band").get<double>();
  if (rec.delta.size() != rec.e.size() || rec.mask.size() != rec.e.size() ||
      rec.soft_weight.size() != rec.e.size()) {
    throw ShapeError("evidence record streams have different lengths");
  }
}

}  // namespace privdistill::evidence
