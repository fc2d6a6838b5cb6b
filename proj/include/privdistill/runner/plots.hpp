#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "privdistill/runner/experiment.hpp"

namespace privdistill::runner {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  std::vector<std::pair<double, double>> markers;  // drawn as stars
  bool scatter = false;
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string render_svg(const Figure& fig);

// Writes internalization, persona, capability, pareto, response-length and
// rho_kept panels. A figure without data is skipped and reported through warn.
std::vector<std::filesystem::path> emit_plots(const std::vector<RunSummary>& runs, const std::filesystem::path& dir,
                                              const std::function<void(const std::string&)>& warn = {});

}  // namespace privdistill::runner
