#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "privdistill/runner/experiment.hpp"

namespace privdistill::runner {

struct SweepJob {
  RunConfig config;
  std::filesystem::path dir;
};

// Runs every job on up to `parallelism` threads. Runs share only read-only
// models; a failing run is recorded in its summary's error and the sweep goes on.
// Results come back in job order.
std::vector<RunSummary> sweep(const std::vector<SweepJob>& jobs, std::size_t parallelism, const RunEnvironment& env,
                              const RunOptions& options = {});

// One row per run: final and best-capability metrics plus the final diagnostics.
nlohmann::json comparison_rows(const std::vector<RunSummary>& runs);
std::string comparison_csv(const std::vector<RunSummary>& runs);

// Writes comparison.json and comparison.csv into dir.
void write_comparison(const std::filesystem::path& dir, const std::vector<RunSummary>& runs);

}  // namespace privdistill::runner
