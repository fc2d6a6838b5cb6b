#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "privdistill/policy/params.hpp"

namespace privdistill::policy {

// On-disk layout:
//   uint64 little-endian   header length N
//   N bytes                JSON header {format, version, arch, seed, step, blocks:[{name,count}], meta}
//   float64 little-endian  the blocks, concatenated in header order
// The first block is always "params".
struct Checkpoint {
  Architecture arch;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, std::vector<double>>> blocks;

  const std::vector<double>* find(const std::string& name) const;
  PolicyParams params() const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_params(const std::filesystem::path& path, const PolicyParams& params, std::uint64_t seed,
                 std::int64_t step);
PolicyParams load_params(const std::filesystem::path& path);

}  // namespace privdistill::policy
