#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "privdistill/rollout/rollout.hpp"

namespace privdistill::rollout {

// One JSON object per rollout: integer token arrays and float arrays for the
// log-prob streams. Doubles are written in shortest round-trip form, so a
// reloaded rollout is bitwise equal to the one that was saved.
void to_json(nlohmann::json& j, const Rollout& r);
void from_json(const nlohmann::json& j, Rollout& r);

// Reads every line of a JSONL file as a JSON object.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace privdistill::rollout
