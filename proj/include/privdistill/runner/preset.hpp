#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "privdistill/objectives/config.hpp"
#include "privdistill/policy/tokens.hpp"
#include "privdistill/tasks/suite.hpp"

namespace privdistill::runner {

// One row of the ablation matrix. Empty optionals are the table's "--" cells.
struct ExperimentPreset {
  std::string code;
  std::string experiment;
  std::optional<tasks::Axis> axis;  // empty for the base row
  objectives::Method method = objectives::Method::kOpsd;
  std::optional<double> guided;
  std::optional<evidence::Region> mask;
  std::optional<bool> kl;
  std::optional<bool> soft;
  std::optional<policy::AttachmentMode> ctx;
  std::optional<int> steps;
  bool in_matrix = true;  // false for toy-scale additions

  bool trains() const { return axis.has_value() && steps.value_or(0) > 0; }
  // ObjectiveConfig implied by the row (learning rate left at its default).
  objectives::ObjectiveConfig objective() const;
};

const std::vector<ExperimentPreset>& preset_table();
// ConfigError for an unknown code.
const ExperimentPreset& find_preset(const std::string& code);

// CSV with the matrix columns, one line per in-matrix preset, in table order.
std::string matrix_csv();

struct SeedManifest {
  int version = 0;
  std::map<std::string, std::uint64_t> seeds;

  std::uint64_t seed_for(const std::string& code) const;  // ConfigError when missing
};

SeedManifest load_seed_manifest(const std::filesystem::path& path);

// Directory holding the checked-in matrix transcription and seed manifest.
std::filesystem::path data_dir();

}  // namespace privdistill::runner
