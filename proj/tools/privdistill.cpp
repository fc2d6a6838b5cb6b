#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/parallel.hpp"
#include "privdistill/diagnostics/diagnostics.hpp"
#include "privdistill/policy/checkpoint.hpp"
#include "privdistill/rollout/rollout_io.hpp"
#include "privdistill/runner/base_model.hpp"
#include "privdistill/runner/experiment.hpp"
#include "privdistill/runner/plots.hpp"
#include "privdistill/runner/preset.hpp"
#include "privdistill/runner/sweep.hpp"

using namespace privdistill;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

// Every RunConfig key becomes --key; values given on the command line or in a
// --config file are applied after the preset defaults.
struct OverrideFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    for (const auto& key : runner::RunConfig::override_keys()) {
      app->add_option("--" + key, values[key], "override " + key)->group("Overrides");
    }
    app->set_config("--config", "", "key = value settings file");
  }

  void apply(runner::RunConfig& c) const {
    for (const auto& [key, value] : values) {
      if (!value.empty()) c.set(key, value);
    }
  }
};

std::size_t resolve_workers(int w) { return w > 0 ? static_cast<std::size_t>(w) : default_workers(); }

runner::RunConfig config_for(const std::string& code, const runner::SeedManifest& seeds, const OverrideFlags& flags,
                             std::optional<std::uint64_t> seed_offset, std::size_t workers) {
  const auto& preset = runner::find_preset(code);
  auto c = runner::RunConfig::from_preset(preset, seeds.seed_for(code));
  flags.apply(c);
  if (seed_offset) c.seed += *seed_offset;
  c.workers = workers;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privileged-context self-distillation experiments on toy tasks"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("-j,--workers", workers, "worker threads (0 = all cores)");

  // presets
  auto* presets = app.add_subcommand("presets", "list the experiment presets");
  bool presets_csv = false;
  presets->add_flag("--csv", presets_csv, "print the ablation matrix as CSV");

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "pretrain (or load) the cached base policy");

  // run
  auto* run = app.add_subcommand("run", "train one preset");
  std::string run_code;
  std::string run_out;
  bool run_fresh = false;
  run->add_option("preset", run_code, "preset code, e.g. N3")->required();
  run->add_option("-o,--out", run_out, "output directory (default <root>/<code>)");
  run->add_flag("--fresh", run_fresh, "ignore existing checkpoints");
  OverrideFlags run_flags;
  run_flags.attach(run);

  // sweep
  auto* sw = app.add_subcommand("sweep", "train several presets");
  std::vector<std::string> sweep_codes;
  std::string sweep_out;
  int sweep_parallel = 1;
  int sweep_seeds = 1;
  bool sweep_fresh = false;
  sw->add_option("presets", sweep_codes, "preset codes (empty = every training preset)");
  sw->add_option("-o,--out", sweep_out, "sweep directory (default <root>/sweep)");
  sw->add_option("-p,--parallel", sweep_parallel, "runs in flight at once");
  sw->add_option("--seeds", sweep_seeds, "replicates per preset (seed, seed+1, ...)");
  sw->add_flag("--fresh", sweep_fresh, "ignore existing checkpoints");
  OverrideFlags sweep_flags;
  sweep_flags.attach(sw);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_path;
  std::uint64_t eval_seed = 0;
  int eval_tokens = 10;
  ev->add_option("checkpoint", eval_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--eval_seed", eval_seed, "evaluation stream seed");
  ev->add_option("--max_response_tokens", eval_tokens, "response budget");

  // diagnose
  auto* dg = app.add_subcommand("diagnose", "recompute diagnostics from a rollout log");
  std::string diag_path;
  std::string diag_compare;
  dg->add_option("rollouts", diag_path, "rollouts.jsonl")->required()->check(CLI::ExistingFile);
  dg->add_option("--compare", diag_compare, "scalars.jsonl to check against")->check(CLI::ExistingFile);

  // plot
  auto* pl = app.add_subcommand("plot", "write SVG figures for run directories");
  std::vector<std::string> plot_runs;
  std::string plot_out = "plots";
  pl->add_option("runs", plot_runs, "run directories")->required();
  pl->add_option("-o,--out", plot_out, "figure directory");

  CLI11_PARSE(app, argc, argv);
  const std::size_t nworkers = resolve_workers(workers);
  const fs::path root = runner::output_root();

  try {
    if (*presets) {
      if (presets_csv) {
        std::cout << runner::matrix_csv();
        return 0;
      }
      const auto seeds = runner::load_seed_manifest(runner::data_dir() / "seeds.json");
      for (const auto& p : runner::preset_table()) {
        std::cout << fmt::format("{:<8} {:<8} {:<18} {:>6}  {}\n", p.code,
                                 p.axis ? std::string(tasks::to_string(*p.axis)) : "-",
                                 std::string(objectives::to_string(p.method)), p.steps.value_or(0), p.experiment);
      }
      std::cout << fmt::format("seed manifest version {}\n", seeds.version);
      return 0;
    }

    runner::Workspace ws = runner::open_workspace(root, nworkers, log_line);
    const runner::RunEnvironment env{ws.suite, ws.policy, ws.base.params, log_line};

    if (*pretrain) {
      std::cout << fmt::format("{}\n{}\n", ws.base.path.string(), json(ws.base.eval).dump(2));
      return 0;
    }
    if (*run) {
      const auto seeds = runner::load_seed_manifest(runner::data_dir() / "seeds.json");
      const auto cfg = config_for(run_code, seeds, run_flags, std::nullopt, nworkers);
      const fs::path dir = run_out.empty() ? root / run_code : fs::path(run_out);
      const auto summary = runner::run_experiment(cfg, dir, env, {.resume = !run_fresh, .stop_after = std::nullopt});
      std::cout << json(summary).dump(2) << "\n";
      return 0;
    }
    if (*sw) {
      const auto seeds = runner::load_seed_manifest(runner::data_dir() / "seeds.json");
      if (sweep_codes.empty()) {
        for (const auto& p : runner::preset_table()) {
          if (p.trains()) sweep_codes.push_back(p.code);
        }
      }
      const fs::path dir = sweep_out.empty() ? root / "sweep" : fs::path(sweep_out);
      std::vector<runner::SweepJob> jobs;
      for (const auto& code : sweep_codes) {
        for (int s = 0; s < sweep_seeds; ++s) {
          const std::string name = sweep_seeds > 1 ? fmt::format("{}-s{}", code, s) : code;
          auto cfg = config_for(code, seeds, sweep_flags, static_cast<std::uint64_t>(s), 1);
          jobs.push_back({cfg, dir / name});
        }
      }
      const auto runs = runner::sweep(jobs, static_cast<std::size_t>(std::max(1, sweep_parallel)), env,
                                      {.resume = !sweep_fresh, .stop_after = std::nullopt});
      runner::write_comparison(dir, runs);
      std::cout << runner::comparison_csv(runs);
      return std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.error.has_value(); }) ? 1 : 0;
    }
    if (*ev) {
      const auto ckpt = policy::load_checkpoint(eval_path);
      tasks::EvalOptions eo;
      eo.seed = eval_seed;
      eo.sampler.max_response_tokens = eval_tokens;
      eo.workers = nworkers;
      auto result = tasks::evaluate_checkpoint(ws.policy, ckpt.params(), ws.suite, eo);
      result.step = ckpt.step;
      std::cout << json(result).dump(2) << "\n";
      return 0;
    }
    if (*dg) {
      const auto recomputed = diagnostics::recompute_from_rows(rollout::read_jsonl(diag_path));
      std::map<std::int64_t, json> logged;
      if (!diag_compare.empty()) {
        for (const auto& row : rollout::read_jsonl(diag_compare)) logged[row.at("step").get<std::int64_t>()] = row;
      }
      int mismatches = 0;
      for (const auto& [step, s] : recomputed) {
        json j = s;
        j["step"] = step;
        if (!diag_compare.empty()) {
          const auto it = logged.find(step);
          bool same = it != logged.end();
          for (const auto& [key, value] : json(s).items()) {
            if (!same) break;
            same = it->second.contains(key) && it->second.at(key) == value;
          }
          j["matches_log"] = same;
          mismatches += same ? 0 : 1;
        }
        std::cout << j.dump() << "\n";
      }
      if (!diag_compare.empty()) {
        std::cerr << fmt::format("{} of {} steps differ from the log\n", mismatches, recomputed.size());
      }
      return mismatches == 0 ? 0 : 1;
    }
    if (*pl) {
      std::vector<runner::RunSummary> runs;
      for (const auto& d : plot_runs) runs.push_back(runner::load_run(d));
      for (const auto& p : runner::emit_plots(runs, plot_out, [](const std::string& w) { log_line("warning: " + w); })) {
        std::cout << p.string() << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
