#include "privdistill/runner/run_config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "privdistill/common/errors.hpp"

namespace privdistill::runner {

namespace {

// Toy-scale training defaults shared by every preset.
constexpr double kToyLearningRate = 0.005;
constexpr double kToyMaxGradNorm = 1.0;

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"method", [](RunConfig& c, auto&, auto& v) { c.objective.method = objectives::method_from_string(v); }},
      {"region", [](RunConfig& c, auto&, auto& v) { c.objective.evidence.region = evidence::region_from_string(v); }},
      {"tau", [](RunConfig& c, auto& k, auto& v) { c.objective.evidence.tau = parse_double(k, v); }},
      {"nz_band", [](RunConfig& c, auto& k, auto& v) { c.objective.evidence.nz_band = parse_double(k, v); }},
      {"epsilon_w", [](RunConfig& c, auto& k, auto& v) { c.objective.evidence.epsilon_w = parse_double(k, v); }},
      {"guided_fraction", [](RunConfig& c, auto& k, auto& v) { c.objective.guided_fraction = parse_double(k, v); }},
      {"kl_beta", [](RunConfig& c, auto& k, auto& v) { c.objective.kl_beta = parse_double(k, v); }},
      {"learning_rate", [](RunConfig& c, auto& k, auto& v) { c.objective.learning_rate = parse_double(k, v); }},
      {"normalization",
       [](RunConfig& c, auto&, auto& v) { c.objective.normalization = objectives::normalization_from_string(v); }},
      {"jsd_beta", [](RunConfig& c, auto& k, auto& v) { c.objective.jsd_beta = parse_double(k, v); }},
      {"ppo_clip", [](RunConfig& c, auto& k, auto& v) { c.objective.ppo_clip = parse_double(k, v); }},
      {"verifier", [](RunConfig& c, auto& k, auto& v) { c.objective.verifier = parse_bool(k, v); }},
      {"axis", [](RunConfig& c, auto&, auto& v) { c.axis = tasks::axis_from_string(v); }},
      {"ctx", [](RunConfig& c, auto&, auto& v) { c.ctx = policy::attachment_mode_from_string(v); }},
      {"steps", [](RunConfig& c, auto& k, auto& v) { c.steps = static_cast<int>(parse_int(k, v)); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"eval_seed", [](RunConfig& c, auto& k, auto& v) { c.eval_seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"checkpoint_interval",
       [](RunConfig& c, auto& k, auto& v) { c.checkpoint_interval = static_cast<int>(parse_int(k, v)); }},
      {"eval_interval", [](RunConfig& c, auto& k, auto& v) { c.eval_interval = static_cast<int>(parse_int(k, v)); }},
      {"prompts_per_step",
       [](RunConfig& c, auto& k, auto& v) { c.prompts_per_step = static_cast<int>(parse_int(k, v)); }},
      {"rollouts_per_prompt",
       [](RunConfig& c, auto& k, auto& v) { c.rollouts_per_prompt = static_cast<int>(parse_int(k, v)); }},
      {"temperature",
       [](RunConfig& c, auto& k, auto& v) { c.sampler.temperature = c.eval_sampler.temperature = parse_double(k, v); }},
      {"top_p", [](RunConfig& c, auto& k, auto& v) { c.sampler.top_p = c.eval_sampler.top_p = parse_double(k, v); }},
      {"top_k",
       [](RunConfig& c, auto& k, auto& v) { c.sampler.top_k = c.eval_sampler.top_k = static_cast<int>(parse_int(k, v)); }},
      {"max_response_tokens",
       [](RunConfig& c, auto& k, auto& v) {
         c.sampler.max_response_tokens = c.eval_sampler.max_response_tokens = static_cast<int>(parse_int(k, v));
       }},
      {"train_temperature", [](RunConfig& c, auto& k, auto& v) { c.sampler.temperature = parse_double(k, v); }},
      {"stratified_guidance",
       [](RunConfig& c, auto& k, auto& v) { c.sampler.stratified_guidance = parse_bool(k, v); }},
      {"optimizer", [](RunConfig& c, auto&, auto& v) { c.optimizer.kind = objectives::optimizer_from_string(v); }},
      {"momentum", [](RunConfig& c, auto& k, auto& v) { c.optimizer.momentum = parse_double(k, v); }},
      {"max_grad_norm", [](RunConfig& c, auto& k, auto& v) { c.optimizer.max_grad_norm = parse_double(k, v); }},
      {"teacher",
       [](RunConfig& c, auto&, auto& v) {
         if (v != "current" && v != "frozen") throw ConfigError("teacher must be 'current' or 'frozen'");
         c.frozen_teacher = v == "frozen";
       }},
      {"math_eval_problems",
       [](RunConfig& c, auto& k, auto& v) { c.math_eval_problems = static_cast<std::size_t>(parse_int(k, v)); }},
      {"diag_window", [](RunConfig& c, auto& k, auto& v) { c.diag_window = static_cast<int>(parse_int(k, v)); }},
      {"log_rollouts", [](RunConfig& c, auto& k, auto& v) { c.log_rollouts = parse_bool(k, v); }},
      {"workers", [](RunConfig& c, auto& k, auto& v) { c.workers = static_cast<std::size_t>(parse_int(k, v)); }},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::from_preset(const ExperimentPreset& preset, std::uint64_t seed) {
  RunConfig c;
  c.code = preset.code;
  c.axis = preset.axis.value_or(tasks::Axis::kIdentity);
  c.objective = preset.objective();
  c.objective.learning_rate = kToyLearningRate;
  c.optimizer.max_grad_norm = kToyMaxGradNorm;
  c.ctx = preset.ctx.value_or(policy::AttachmentMode::kSystem);
  c.steps = preset.trains() ? *preset.steps : 0;
  c.seed = seed;
  c.sampler.max_response_tokens = 10;
  c.eval_sampler = c.sampler;
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) {
    throw ConfigError("unknown setting '" + key + "'");
  }
  it->second(*this, key, value);
}

const std::vector<std::string>& RunConfig::override_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::validate() const {
  if (steps > 0) objective.validate();
  sampler.validate();
  eval_sampler.validate();
  optimizer.validate();
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (checkpoint_interval < 1 || eval_interval < 1) throw ConfigError("intervals must be at least 1");
  if (prompts_per_step < 1 || rollouts_per_prompt < 1) throw ConfigError("batch shape must be positive");
  if (diag_window < 1) throw ConfigError("diag_window must be at least 1");
  if (ctx == policy::AttachmentMode::kNone) throw ConfigError("training needs an attachment mode");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  const auto sampler = [](const rollout::SamplerConfig& s) {
    return nlohmann::json{{"temperature", s.temperature},
                          {"top_p", s.top_p},
                          {"top_k", s.top_k},
                          {"max_response_tokens", s.max_response_tokens},
                          {"stratified_guidance", s.stratified_guidance}};
  };
  j = nlohmann::json{
      {"code", c.code},
      {"axis", std::string(tasks::to_string(c.axis))},
      {"method", std::string(objectives::to_string(c.objective.method))},
      {"region", std::string(evidence::to_string(c.objective.evidence.region))},
      {"tau", c.objective.evidence.tau},
      {"nz_band", c.objective.evidence.nz_band},
      {"epsilon_w", c.objective.evidence.epsilon_w},
      {"guided_fraction", c.objective.guided_fraction},
      {"kl_beta", c.objective.kl_beta},
      {"learning_rate", c.objective.learning_rate},
      {"normalization", std::string(objectives::to_string(c.objective.normalization))},
      {"jsd_beta", c.objective.jsd_beta},
      {"ppo_clip", c.objective.ppo_clip},
      {"verifier", c.objective.verifier},
      {"ctx", std::string(policy::to_string(c.ctx))},
      {"steps", c.steps},
      {"seed", c.seed},
      {"eval_seed", c.eval_seed},
      {"checkpoint_interval", c.checkpoint_interval},
      {"eval_interval", c.eval_interval},
      {"prompts_per_step", c.prompts_per_step},
      {"rollouts_per_prompt", c.rollouts_per_prompt},
      {"sampler", sampler(c.sampler)},
      {"eval_sampler", sampler(c.eval_sampler)},
      {"optimizer", std::string(objectives::to_string(c.optimizer.kind))},
      {"momentum", c.optimizer.momentum},
      {"max_grad_norm", c.optimizer.max_grad_norm},
      {"teacher", c.frozen_teacher ? "frozen" : "current"},
      {"math_eval_problems", c.math_eval_problems},
      {"diag_window", c.diag_window},
      {"log_rollouts", c.log_rollouts},
  };
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  c.code = j.at("code").get<std::string>();
  const auto sampler = [](const nlohmann::json& s, rollout::SamplerConfig& out) {
    out.temperature = s.at("temperature").get<double>();
    out.top_p = s.at("top_p").get<double>();
    out.top_k = s.at("top_k").get<int>();
    out.max_response_tokens = s.at("max_response_tokens").get<int>();
    out.stratified_guidance = s.value("stratified_guidance", false);
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "code" || key == "sampler" || key == "eval_sampler") continue;
    c.set(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  sampler(j.at("sampler"), c.sampler);
  sampler(j.at("eval_sampler"), c.eval_sampler);
}

}  // namespace privdistill::runner
