#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "privdistill/diagnostics/diagnostics.hpp"
#include "privdistill/policy/policy.hpp"
#include "privdistill/runner/run_config.hpp"
#include "privdistill/tasks/evaluation.hpp"

namespace privdistill::runner {

// Output directory layout:
//   config.json      the resolved RunConfig
//   scalars.jsonl    one object per training step (loss terms + batch diagnostics)
//   evals.jsonl      one EvalResult per evaluated checkpoint, step 0 first
//   rollouts.jsonl   {step, rollout, evidence} rows when log_rollouts is set
//   checkpoints/     step_XXXXXX.ckpt with params and optimizer state
//   summary.json     evaluations, best-capability step, final diagnostics
struct RunSummary {
  std::string code;
  std::filesystem::path dir;
  nlohmann::json config;
  std::vector<nlohmann::json> scalars;
  std::vector<tasks::EvalResult> evals;
  std::optional<std::int64_t> best_step;  // argmax of math accuracy, earliest on ties
  diagnostics::DiagnosticsSummary final_diagnostics;
  std::int64_t steps_done = 0;
  std::int64_t skipped_steps = 0;
  bool completed = false;
  std::optional<std::string> error;

  const tasks::EvalResult* final_eval() const { return evals.empty() ? nullptr : &evals.back(); }
  const tasks::EvalResult* best_eval() const;
};

void to_json(nlohmann::json& j, const RunSummary& s);

// Models shared by every run of a sweep.
struct RunEnvironment {
  const tasks::TaskSuite& suite;
  const policy::Policy& policy;
  const policy::PolicyParams& base;
  std::function<void(const std::string&)> log;
};

struct RunOptions {
  bool resume = true;                  // continue from the newest checkpoint when config.json matches
  std::optional<int> stop_after;       // stop once this many steps are done (simulated interruption)
};

inline constexpr int kMaxNonFiniteStreak = 10;

// sample -> evidence -> advantages -> update, evaluating and checkpointing on
// schedule. Throws NumericError after more than kMaxNonFiniteStreak
// consecutive non-finite steps, leaving dump.json in the output directory.
RunSummary run_experiment(const RunConfig& config, const std::filesystem::path& dir, const RunEnvironment& env,
                          const RunOptions& options = {});

// Rebuilds a summary from a run directory's logs.
RunSummary load_run(const std::filesystem::path& dir);

std::optional<std::int64_t> best_capability_step(const std::vector<tasks::EvalResult>& evals);

}  // namespace privdistill::runner
