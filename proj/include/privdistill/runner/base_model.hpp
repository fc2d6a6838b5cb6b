#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "privdistill/policy/policy.hpp"
#include "privdistill/tasks/corpus.hpp"
#include "privdistill/tasks/evaluation.hpp"

namespace privdistill::runner {

struct BaseSpec {
  std::uint64_t split_seed = 0;
  tasks::CorpusSpec corpus;
  tasks::PretrainOptions pretrain;

  nlohmann::json to_json(const policy::Architecture& arch) const;
  // Stable hex digest of to_json(), used as the cache key.
  std::string digest(const policy::Architecture& arch) const;
};

struct BaseModel {
  policy::PolicyParams params;
  tasks::EvalResult eval;
  std::string digest;
  std::filesystem::path path;
  bool from_cache = false;
};

// Thresholds the pretrained base must meet on the identity probe.
inline constexpr double kBaseMinCounter = 0.8;
inline constexpr double kBaseMaxTarget = 0.001;

// Loads <root>/base/base-<digest>.ckpt or pretrains and caches it. A fresh
// base that misses the thresholds (counter-name >= 0.8, target self-name
// < 0.001, math accuracy above chance) raises TaskConstructionError.
BaseModel ensure_base(const std::filesystem::path& root, const tasks::TaskSuite& suite,
                      const policy::Policy& pol, const BaseSpec& spec, std::size_t workers = 1,
                      const std::function<void(const std::string&)>& log = {});

// Output root: $PRIVDISTILL_OUT if set, else ./runs.
std::filesystem::path output_root();

// Task suite, toy policy and cached base, as used by every run.
struct Workspace {
  tasks::TaskSuite suite;
  policy::Policy policy;
  BaseModel base;
};

Workspace open_workspace(const std::filesystem::path& root, std::size_t workers = 1,
                         const std::function<void(const std::string&)>& log = {});

}  // namespace privdistill::runner
