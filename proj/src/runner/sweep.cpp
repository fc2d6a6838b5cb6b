#include "privdistill/runner/sweep.hpp"

#include <fstream>
#include <mutex>

#include <fmt/format.h>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/parallel.hpp"

namespace privdistill::runner {

using nlohmann::json;

std::vector<RunSummary> sweep(const std::vector<SweepJob>& jobs, std::size_t parallelism, const RunEnvironment& env,
                              const RunOptions& options) {
  std::vector<RunSummary> out(jobs.size());
  std::mutex log_mutex;
  RunEnvironment shared = env;
  if (env.log) {
    shared.log = [&](const std::string& msg) {
      std::lock_guard lock(log_mutex);
      env.log(msg);
    };
  }
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    try {
      out[i] = run_experiment(jobs[i].config, jobs[i].dir, shared, options);
    } catch (const std::exception& e) {
      out[i].code = jobs[i].config.code;
      out[i].dir = jobs[i].dir;
      out[i].config = json(jobs[i].config);
      out[i].error = e.what();
      if (shared.log) shared.log(fmt::format("[{}] failed: {}", jobs[i].config.code, e.what()));
    }
  });
  return out;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json comparison_rows(const std::vector<RunSummary>& runs) {
  json rows = json::array();
  for (const auto& s : runs) {
    json row = {{"code", s.code}};
    if (!s.config.is_null()) {
      for (const char* key : {"axis", "method", "guided_fraction", "region", "kl_beta", "ctx", "steps", "seed"}) {
        row[key] = s.config.value(key, json(nullptr));
      }
    }
    const auto* fin = s.final_eval();
    const auto* best = s.best_eval();
    row["final_step"] = fin ? json(fin->step) : json(nullptr);
    row["id_selfname"] = fin ? json(fin->identity.edge_selfname) : json(nullptr);
    row["id_counter"] = fin ? json(fin->identity.counter_name) : json(nullptr);
    row["persona_selfname"] = fin ? json(fin->persona.edge_selfname) : json(nullptr);
    row["math_acc"] = fin ? json(fin->math_acc) : json(nullptr);
    row["best_step"] = best ? json(best->step) : json(nullptr);
    row["best_math_acc"] = best ? json(best->math_acc) : json(nullptr);
    row["best_id_selfname"] = best ? json(best->identity.edge_selfname) : json(nullptr);
    row["rho_kept"] = opt(s.final_diagnostics.rho_kept);
    row["rho_lev"] = opt(s.final_diagnostics.rho_lev);
    row["rho_agree"] = opt(s.final_diagnostics.rho_agree);
    row["error"] = s.error ? json(*s.error) : json(nullptr);
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_csv(const std::vector<RunSummary>& runs) {
  static const std::vector<std::string> columns = {
      "code",     "axis",      "method",           "guided_fraction", "region",        "kl_beta",
      "ctx",      "steps",     "seed",             "final_step",      "id_selfname",   "id_counter",
      "persona_selfname",      "math_acc",         "best_step",       "best_math_acc", "best_id_selfname",
      "rho_kept", "rho_lev",   "rho_agree",        "error"};
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += "\n";
  for (const auto& row : comparison_rows(runs)) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ",";
      const json& v = row.value(columns[c], json(nullptr));
      if (v.is_null()) continue;
      if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") != std::string::npos) {
          std::string quoted = "\"";
          for (char ch : s) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          s = quoted + "\"";
        }
        out += s;
      } else {
        out += v.dump();
      }
    }
    out += "\n";
  }
  return out;
}

void write_comparison(const std::filesystem::path& dir, const std::vector<RunSummary>& runs) {
  std::filesystem::create_directories(dir);
  std::ofstream js(dir / "comparison.json");
  std::ofstream csv(dir / "comparison.csv");
  if (!js || !csv) throw IoError("cannot write comparison files in " + dir.string());
  js << comparison_rows(runs).dump(2) << "\n";
  csv << comparison_csv(runs);
}

}  // namespace privdistill::runner
