#include "privdistill/tasks/suite.hpp"

#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::tasks {

std::string_view to_string(Axis a) { return a == Axis::kIdentity ? "identity" : "math"; }

Axis axis_from_string(std::string_view s) {
  if (s == "identity") return Axis::kIdentity;
  if (s == "math") return Axis::kMath;
  throw ConfigError("unknown axis '" + std::string(s) + "'");
}

TaskSuite make_task_suite(std::uint64_t split_seed) {
  TaskSuite suite;
  suite.math = make_math_task(suite.lang, split_seed);
  std::vector<TokenSequence> capability;
  for (std::size_t i = 0; i < 12; ++i) capability.push_back(suite.math.heldout[i].prompt);
  suite.identity = make_identity_task(suite.lang, std::move(capability));
  return suite;
}

policy::Architecture toy_architecture(const ToyLanguage& lang) {
  return policy::Architecture::transformer(lang.vocab().size(), 32, 32, 2, 2, 64);
}

std::vector<rollout::PromptItem> training_items(const TaskSuite& suite, Axis axis) {
  std::vector<rollout::PromptItem> items;
  if (axis == Axis::kIdentity) {
    for (const auto& p : suite.identity.identity_prompts) {
      items.push_back({p, suite.identity.privileged, std::nullopt, static_cast<std::int64_t>(items.size())});
    }
  } else {
    for (const auto& m : suite.math.train) {
      items.push_back({m.prompt, m.trace, m.answer, static_cast<std::int64_t>(items.size())});
    }
  }
  return items;
}

}  // namespace privdistill::tasks
