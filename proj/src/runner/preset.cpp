#include "privdistill/runner/preset.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "privdistill/common/errors.hpp"

namespace privdistill::runner {

using evidence::Region;
using objectives::Method;
using policy::AttachmentMode;
using tasks::Axis;

namespace {

ExperimentPreset row(std::string code, std::string experiment, Axis axis, Method method, std::optional<double> guided,
                     std::optional<Region> mask, std::optional<bool> kl, std::optional<bool> soft,
                     AttachmentMode ctx, int steps) {
  ExperimentPreset p;
  p.code = std::move(code);
  p.experiment = std::move(experiment);
  p.axis = axis;
  p.method = method;
  p.guided = guided;
  p.mask = mask;
  p.kl = kl;
  p.soft = soft;
  p.ctx = ctx;
  p.steps = steps;
  return p;
}

std::vector<ExperimentPreset> build_table() {
  constexpr auto I = Axis::kIdentity;
  constexpr auto M = Axis::kMath;
  constexpr auto sys = AttachmentMode::kSystem;
  constexpr auto user = AttachmentMode::kUserPrefix;
  std::vector<ExperimentPreset> t;

  ExperimentPreset base;
  base.code = "N0";
  base.experiment = "base";
  t.push_back(base);

  t.push_back(row("N1", "OPSD", I, Method::kOpsd, std::nullopt, Region::kNone, false, false, sys, 100));
  t.push_back(row("N2", "guided OPSD", I, Method::kOpsd, 0.5, Region::kNone, false, false, sys, 100));
  t.push_back(row("N2u", "guided OPSD", I, Method::kOpsd, 0.5, Region::kNone, false, false, user, 100));
  t.push_back(row("N7", "EDGE-OPD without KL", I, Method::kEdgeOpd, 0.5, Region::kPositive, false, false, sys, 100));
  t.push_back(row("N7u", "EDGE-OPD without KL", I, Method::kEdgeOpd, 0.5, Region::kPositive, false, false, user, 100));
  t.push_back(row("N4", "RLSD-no-verifier", I, Method::kRlsdNoVerifier, 0.0, Region::kNone, false, true, sys, 100));
  t.push_back(row("N4g", "RLSD-no-verifier (guided)", I, Method::kRlsdNoVerifier, 0.5, Region::kNone, false, true, sys, 100));
  t.push_back(row("N3", "EDGE-OPD", I, Method::kEdgeOpd, 0.5, Region::kPositive, true, false, sys, 100));
  t.push_back(row("N3u", "EDGE-OPD", I, Method::kEdgeOpd, 0.5, Region::kPositive, true, false, user, 100));
  t.push_back(row("N3u-g0125", "EDGE-OPD", I, Method::kEdgeOpd, 0.125, Region::kPositive, true, false, user, 100));
  t.push_back(row("N3u-g100", "EDGE-OPD", I, Method::kEdgeOpd, 1.0, Region::kPositive, true, false, user, 100));
  t.push_back(row("N11", "EDGE-OPD, negative mask", I, Method::kEdgeOpd, 0.5, Region::kNegative, true, false, user, 100));
  t.push_back(row("N12", "EDGE-OPD, near-zero mask", I, Method::kEdgeOpd, 0.5, Region::kNearZero, true, false, user, 100));

  t.push_back(row("N9", "OPSD", M, Method::kOpsd, 0.5, Region::kNone, false, false, sys, 50));
  t.push_back(row("N10", "RLSD-no-verifier", M, Method::kRlsdNoVerifier, 0.5, Region::kNone, false, true, sys, 50));
  t.push_back(row("N15", "RLSD", M, Method::kRlsd, 0.5, std::nullopt, false, std::nullopt, sys, 50));
  t.push_back(row("N6", "EDGE-OPD", M, Method::kEdgeOpd, 0.5, Region::kPositive, true, false, sys, 50));
  t.push_back(row("N13", "EDGE-OPD, negative mask", M, Method::kEdgeOpd, 0.5, Region::kNegative, true, false, sys, 50));
  t.push_back(row("N14", "EDGE-OPD, near-zero mask", M, Method::kEdgeOpd, 0.5, Region::kNearZero, true, false, sys, 50));

  // Toy-scale additions: the full-distribution OPD menu on the identity axis.
  for (auto [code, name, m] : {std::tuple{"T1-fkl", "OPD forward KL", Method::kOpdForwardKl},
                               std::tuple{"T2-rkl", "OPD reverse KL", Method::kOpdReverseKl},
                               std::tuple{"T3-jsd", "OPD JSD", Method::kOpdJsd}}) {
    auto p = row(code, name, I, m, 0.5, Region::kNone, false, false, sys, 100);
    p.in_matrix = false;
    t.push_back(p);
  }
  return t;
}

std::string dash_or(const std::optional<std::string>& s) { return s.value_or("--"); }

std::string format_fraction(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

std::string mask_label(Region r) {
  switch (r) {
    case Region::kPositive:
      return "pos";
    case Region::kNegative:
      return "neg";
    case Region::kNearZero:
      return "nz";
    case Region::kNone:
      return "none";
  }
  return "?";
}

std::string csv_field(const std::string& s) {
  return s.find(',') == std::string::npos ? s : "\"" + s + "\"";
}

}  // namespace

objectives::ObjectiveConfig ExperimentPreset::objective() const {
  objectives::ObjectiveConfig c;
  c.method = method;
  c.guided_fraction = guided.value_or(0.0);
  c.evidence.region = mask.value_or(Region::kNone);
  c.kl_beta = kl.value_or(false) ? objectives::kPaperKlBeta : 0.0;
  c.verifier = axis == Axis::kMath;
  return c;
}

const std::vector<ExperimentPreset>& preset_table() {
  static const std::vector<ExperimentPreset> table = build_table();
  return table;
}

const ExperimentPreset& find_preset(const std::string& code) {
  for (const auto& p : preset_table()) {
    if (p.code == code) return p;
  }
  throw ConfigError("unknown preset '" + code + "'");
}

std::string matrix_csv() {
  std::string out = "code,experiment,axis,guided,mask,kl,soft,ctx,steps\n";
  const auto yn = [](const std::optional<bool>& b) -> std::optional<std::string> {
    if (!b) return std::nullopt;
    return *b ? "yes" : "no";
  };
  for (const auto& p : preset_table()) {
    if (!p.in_matrix) continue;
    std::optional<std::string> axis, guided, mask, ctx, steps;
    if (p.axis) axis = std::string(tasks::to_string(*p.axis));
    if (p.guided) guided = format_fraction(*p.guided);
    if (p.mask) mask = mask_label(*p.mask);
    if (p.ctx) ctx = *p.ctx == AttachmentMode::kSystem ? "sys" : "user";
    if (p.steps) steps = std::to_string(*p.steps);
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", p.code, csv_field(p.experiment), dash_or(axis),
                       dash_or(guided), dash_or(mask), dash_or(yn(p.kl)), dash_or(yn(p.soft)), dash_or(ctx),
                       dash_or(steps));
  }
  return out;
}

std::uint64_t SeedManifest::seed_for(const std::string& code) const {
  const auto it = seeds.find(code);
  if (it == seeds.end()) {
    throw ConfigError("seed manifest has no entry for '" + code + "'");
  }
  return it->second;
}

SeedManifest load_seed_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open seed manifest " + path.string());
  }
  const auto j = nlohmann::json::parse(is);
  if (j.value("format", "") != "privdistill-seeds") {
    throw ConfigError("not a seed manifest: " + path.string());
  }
  SeedManifest m;
  m.version = j.at("version").get<int>();
  m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  return m;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("PRIVDISTILL_DATA")) return env;
  return PRIVDISTILL_DATA_DIR;
}

}  // namespace privdistill::runner
