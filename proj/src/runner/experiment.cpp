#include "privdistill/runner/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <regex>

#include <fmt/format.h>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/rng.hpp"
#include "privdistill/evidence/evidence.hpp"
#include "privdistill/objectives/advantages.hpp"
#include "privdistill/objectives/update.hpp"
#include "privdistill/policy/checkpoint.hpp"
#include "privdistill/rollout/rollout_io.hpp"
#include "privdistill/tasks/math.hpp"
#include "privdistill/tasks/suite.hpp"

namespace privdistill::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string checkpoint_name(std::int64_t step) { return fmt::format("step_{:06d}.ckpt", step); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path) : path_(path), os_(path, std::ios::app) {
    if (!os_) throw IoError("cannot append to " + path.string());
  }
  void write(const json& row) {
    os_ << row.dump() << '\n';
    os_.flush();
  }

 private:
  fs::path path_;
  std::ofstream os_;
};

std::vector<json> read_rows(const fs::path& path) {
  return fs::exists(path) ? rollout::read_jsonl(path) : std::vector<json>{};
}

// Keeps the rows for which keep(row) holds; used to roll logs back to a checkpoint.
void truncate_jsonl(const fs::path& path, const std::function<bool(const json&)>& keep) {
  if (!fs::exists(path)) return;
  std::string out;
  for (const auto& row : rollout::read_jsonl(path)) {
    if (keep(row)) out += row.dump() + "\n";
  }
  write_text(path, out);
}

std::optional<std::int64_t> latest_checkpoint(const fs::path& dir) {
  const fs::path ck = dir / "checkpoints";
  if (!fs::exists(ck)) return std::nullopt;
  static const std::regex pattern(R"(step_(\d+)\.ckpt)");
  std::optional<std::int64_t> best;
  for (const auto& entry : fs::directory_iterator(ck)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const auto step = std::stoll(m[1].str());
      if (!best || step > *best) best = step;
    }
  }
  return best;
}

std::vector<std::size_t> choose_prompts(std::size_t available, std::size_t wanted, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> idx(available);
  std::iota(idx.begin(), idx.end(), 0);
  if (wanted >= available) return idx;
  for (std::size_t i = 0; i < wanted; ++i) {
    std::swap(idx[i], idx[i + rng.below(available - i)]);
  }
  idx.resize(wanted);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct StepBatch {
  std::vector<rollout::Rollout> rollouts;
  std::vector<evidence::EvidenceRecord> records;
};

diagnostics::DiagnosticsSummary pooled(const std::deque<StepBatch>& window) {
  std::vector<rollout::Rollout> rs;
  std::vector<evidence::EvidenceRecord> es;
  for (const auto& b : window) {
    rs.insert(rs.end(), b.rollouts.begin(), b.rollouts.end());
    es.insert(es.end(), b.records.begin(), b.records.end());
  }
  return diagnostics::summarize(rs, es);
}

tasks::EvalOptions eval_options(const RunConfig& c) {
  tasks::EvalOptions eo;
  eo.sampler = c.eval_sampler;
  eo.sampler.guided_fraction = 0.0;
  eo.seed = c.eval_seed;
  eo.math_problems = c.math_eval_problems;
  eo.workers = c.workers;
  return eo;
}

json run_config_json(const RunConfig& c) { return json(c); }

}  // namespace

const tasks::EvalResult* RunSummary::best_eval() const {
  if (!best_step) return nullptr;
  for (const auto& e : evals) {
    if (e.step == *best_step) return &e;
  }
  return nullptr;
}

std::optional<std::int64_t> best_capability_step(const std::vector<tasks::EvalResult>& evals) {
  std::optional<std::int64_t> best;
  double acc = -1.0;
  for (const auto& e : evals) {
    if (e.math_acc > acc) {
      acc = e.math_acc;
      best = e.step;
    }
  }
  return best;
}

void to_json(json& j, const RunSummary& s) {
  j = json{{"code", s.code},
           {"config", s.config},
           {"evals", s.evals},
           {"best_step", s.best_step ? json(*s.best_step) : json(nullptr)},
           {"final_diagnostics", s.final_diagnostics},
           {"steps_done", s.steps_done},
           {"skipped_steps", s.skipped_steps},
           {"completed", s.completed},
           {"error", s.error ? json(*s.error) : json(nullptr)}};
}

RunSummary run_experiment(const RunConfig& config, const fs::path& dir, const RunEnvironment& env,
                          const RunOptions& options) {
  config.validate();
  const auto& pol = env.policy;
  const auto log = [&](const std::string& msg) {
    if (env.log) env.log(fmt::format("[{}] {}", config.code, msg));
  };
  const json cfg_json = run_config_json(config);

  fs::create_directories(dir / "checkpoints");
  const fs::path cfg_path = dir / "config.json";
  const fs::path scalars_path = dir / "scalars.jsonl";
  const fs::path evals_path = dir / "evals.jsonl";
  const fs::path rollouts_path = dir / "rollouts.jsonl";

  RunSummary summary;
  summary.code = config.code;
  summary.dir = dir;
  summary.config = cfg_json;

  policy::PolicyParams params = env.base;
  objectives::OptimizerState opt_state;
  std::int64_t start = 0;
  int nonfinite_streak = 0;

  std::optional<std::int64_t> resume_step;
  if (options.resume && fs::exists(cfg_path)) {
    const json on_disk = json::parse(std::ifstream(cfg_path));
    if (on_disk != cfg_json) {
      throw ConfigError("run directory " + dir.string() + " holds a different configuration");
    }
    resume_step = latest_checkpoint(dir);
  }

  if (resume_step) {
    const auto ckpt = policy::load_checkpoint(dir / "checkpoints" / checkpoint_name(*resume_step));
    params = ckpt.params();
    opt_state.steps = ckpt.meta.at("optimizer_steps").get<std::int64_t>();
    if (const auto* m = ckpt.find("opt_m")) opt_state.m = *m;
    if (const auto* v = ckpt.find("opt_v")) opt_state.v = *v;
    summary.skipped_steps = ckpt.meta.at("skipped_total").get<std::int64_t>();
    nonfinite_streak = ckpt.meta.at("nonfinite_streak").get<int>();
    start = *resume_step;
    const auto before = [&](const json& row) { return row.at("step").get<std::int64_t>() < start; };
    truncate_jsonl(scalars_path, before);
    truncate_jsonl(rollouts_path, before);
    truncate_jsonl(evals_path, [&](const json& row) { return row.at("step").get<std::int64_t>() <= start; });
    for (const auto& row : read_rows(scalars_path)) summary.scalars.push_back(row);
    for (const auto& row : read_rows(evals_path)) summary.evals.push_back(row.get<tasks::EvalResult>());
    log(fmt::format("resuming at step {}", start));
  } else {
    for (const auto& p : {scalars_path, evals_path, rollouts_path, dir / "summary.json", dir / "dump.json"}) {
      fs::remove(p);
    }
    for (const auto& entry : fs::directory_iterator(dir / "checkpoints")) fs::remove(entry.path());
    write_text(cfg_path, cfg_json.dump(2) + "\n");
  }

  JsonlWriter scalars_out(scalars_path);
  JsonlWriter evals_out(evals_path);
  std::optional<JsonlWriter> rollouts_out;
  if (config.log_rollouts) rollouts_out.emplace(rollouts_path);

  const auto evaluate = [&](std::int64_t step) {
    auto result = tasks::evaluate_checkpoint(pol, params, env.suite, eval_options(config));
    result.step = step;
    evals_out.write(json(result));
    summary.evals.push_back(result);
    log(fmt::format("step {:4d}  selfname {:.3f}  counter {:.3f}  persona {:.3f}  math {:.3f}", step,
                    result.identity.edge_selfname, result.identity.counter_name, result.persona.edge_selfname,
                    result.math_acc));
  };
  const auto checkpoint = [&](std::int64_t step) {
    policy::Checkpoint ck;
    ck.arch = pol.arch();
    ck.seed = config.seed;
    ck.step = step;
    ck.meta = {{"kind", "run"},
               {"code", config.code},
               {"optimizer_steps", opt_state.steps},
               {"skipped_total", summary.skipped_steps},
               {"nonfinite_streak", nonfinite_streak}};
    ck.blocks.emplace_back("params", params.values);
    if (!opt_state.m.empty()) ck.blocks.emplace_back("opt_m", opt_state.m);
    if (!opt_state.v.empty()) ck.blocks.emplace_back("opt_v", opt_state.v);
    policy::save_checkpoint(dir / "checkpoints" / checkpoint_name(step), ck);
  };

  if (!resume_step) {
    evaluate(0);
    checkpoint(0);
  }

  const auto items = tasks::training_items(env.suite, config.axis);
  rollout::SamplerConfig sampler = config.sampler;
  sampler.guided_fraction = config.objective.guided_fraction;
  const bool rlsd = config.objective.method == objectives::Method::kRlsd;
  if (rlsd && config.axis != tasks::Axis::kMath) {
    throw ConfigError("rlsd needs the verifiable math axis");
  }

  // Trailing window for the final diagnostics table; refilled from the rollout
  // log after a resume so the pooled values do not depend on interruptions.
  std::deque<StepBatch> window;
  if (resume_step && config.log_rollouts) {
    std::map<std::int64_t, StepBatch> by_step;
    for (const auto& row : read_rows(rollouts_path)) {
      const auto s = row.at("step").get<std::int64_t>();
      if (s < start - config.diag_window) continue;
      by_step[s].rollouts.push_back(row.at("rollout").get<rollout::Rollout>());
      by_step[s].records.push_back(row.at("evidence").get<evidence::EvidenceRecord>());
    }
    for (auto& [s, b] : by_step) window.push_back(std::move(b));
  }

  const std::int64_t end =
      options.stop_after ? std::min<std::int64_t>(config.steps, *options.stop_after) : config.steps;
  for (std::int64_t k = start; k < end; ++k) {
    const auto k_index = static_cast<std::uint64_t>(k);
    const auto chosen = choose_prompts(items.size(), static_cast<std::size_t>(config.prompts_per_step),
                                       derive_seed(config.seed, {stream::kBatch, k_index}));
    std::vector<rollout::PromptItem> step_items;
    for (std::size_t i : chosen) step_items.push_back(items[i]);

    const policy::PolicyParams& teacher = config.frozen_teacher ? env.base : params;
    const rollout::PolicySet set{pol, params, teacher, env.base};
    StepBatch batch;
    batch.rollouts = rollout::sample_batch(set, step_items, sampler,
                                           {.seed = derive_seed(config.seed, {stream::kSample, k_index}),
                                            .rollouts_per_prompt = config.rollouts_per_prompt,
                                            .attachment = config.ctx,
                                            .workers = config.workers});
    for (const auto& r : batch.rollouts) {
      batch.records.push_back(evidence::compute_evidence(r, config.objective.evidence));
    }

    std::optional<objectives::GroupRewardBatch> rewards;
    json reward_stats = nullptr;
    if (config.axis == tasks::Axis::kMath) {
      std::vector<std::int64_t> groups;
      std::vector<int> rs;
      for (const auto& r : batch.rollouts) {
        const auto& item = step_items[static_cast<std::size_t>(r.group)];
        const auto& problem = env.suite.math.train[static_cast<std::size_t>(item.id)];
        groups.push_back(r.group);
        rs.push_back(tasks::verify_math(r.response, problem, env.suite.lang).reward);
      }
      rewards = objectives::GroupRewardBatch::build(groups, rs);
      const double mean = static_cast<double>(std::accumulate(rs.begin(), rs.end(), 0)) /
                          static_cast<double>(rs.size());
      reward_stats = {{"mean_reward", mean}, {"degenerate_groups", rewards->degenerate_groups()}};
    }

    std::vector<objectives::WeightedRollout> weighted;
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      weighted.push_back({&batch.rollouts[i],
                          objectives::build_advantages(batch.rollouts[i], batch.records[i], config.objective,
                                                       rlsd ? &*rewards : nullptr, i),
                          objectives::weighted_token_count(batch.records[i], config.objective)});
    }

    const objectives::UpdateContext ctx{pol, &teacher, &env.base, config.optimizer, config.workers};
    auto update = objectives::apply_update(ctx, params, opt_state, weighted, config.objective);
    const auto& st = update.stats;
    const bool nonfinite = st.skipped || !std::isfinite(st.loss);
    if (nonfinite) {
      ++summary.skipped_steps;
      ++nonfinite_streak;
    } else {
      nonfinite_streak = 0;
      params = std::move(update.params);
    }

    const auto diag = diagnostics::summarize(batch.rollouts, batch.records);
    json row = {{"step", k},
                {"loss", st.loss},
                {"surrogate", st.surrogate},
                {"divergence", st.divergence},
                {"kl_anchor", st.kl_anchor},
                {"kl_base", st.kl_base},
                {"grad_norm", st.grad_norm},
                {"clip_fraction", st.clip_fraction},
                {"weighted_tokens", st.weighted_tokens},
                {"skipped", nonfinite},
                {"guided_rollouts", std::count_if(batch.rollouts.begin(), batch.rollouts.end(),
                                                  [](const auto& r) { return r.guided; })},
                {"mean_reward", nullptr},
                {"degenerate_groups", nullptr}};
    if (!reward_stats.is_null()) row.update(reward_stats);
    row.update(json(diag));
    scalars_out.write(row);
    summary.scalars.push_back(row);
    if (rollouts_out) {
      for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
        rollouts_out->write({{"step", k}, {"rollout", batch.rollouts[i]}, {"evidence", batch.records[i]}});
      }
    }

    if (nonfinite_streak > kMaxNonFiniteStreak) {
      json dump = {{"step", k},
                   {"streak", nonfinite_streak},
                   {"last_scalars", row},
                   {"rollouts", batch.rollouts},
                   {"param_norm", std::sqrt(std::inner_product(params.values.begin(), params.values.end(),
                                                               params.values.begin(), 0.0))}};
      write_text(dir / "dump.json", dump.dump(2) + "\n");
      throw NumericError(fmt::format("{}: {} consecutive non-finite steps at step {}; see {}", config.code,
                                     nonfinite_streak, k, (dir / "dump.json").string()));
    }

    window.push_back(std::move(batch));
    while (window.size() > static_cast<std::size_t>(config.diag_window)) window.pop_front();

    const std::int64_t done = k + 1;
    if (done % config.eval_interval == 0 || done == config.steps) evaluate(done);
    if (done % config.checkpoint_interval == 0 || done == config.steps) checkpoint(done);
  }

  summary.steps_done = end;
  summary.completed = end == config.steps;
  summary.best_step = best_capability_step(summary.evals);
  summary.final_diagnostics = pooled(window);
  if (summary.completed) write_text(dir / "summary.json", json(summary).dump(2) + "\n");
  return summary;
}

RunSummary load_run(const fs::path& dir) {
  RunSummary s;
  s.dir = dir;
  if (!fs::exists(dir / "config.json")) throw IoError("no run at " + dir.string());
  s.config = json::parse(std::ifstream(dir / "config.json"));
  s.code = s.config.at("code").get<std::string>();
  s.scalars = read_rows(dir / "scalars.jsonl");
  for (const auto& row : read_rows(dir / "evals.jsonl")) s.evals.push_back(row.get<tasks::EvalResult>());
  s.best_step = best_capability_step(s.evals);
  s.steps_done = static_cast<std::int64_t>(s.scalars.size());
  for (const auto& row : s.scalars) s.skipped_steps += row.at("skipped").get<bool>() ? 1 : 0;
  s.completed = s.steps_done == s.config.at("steps").get<std::int64_t>();
  return s;
}

}  // namespace privdistill::runner
