#pragma once

#include <cstdint>
#include <vector>

#include "privdistill/policy/architecture.hpp"
#include "privdistill/rollout/rollout.hpp"
#include "privdistill/tasks/identity.hpp"
#include "privdistill/tasks/language.hpp"
#include "privdistill/tasks/math.hpp"

namespace privdistill::tasks {

enum class Axis { kIdentity, kMath };

std::string_view to_string(Axis a);
Axis axis_from_string(std::string_view s);

// Both task axes over one language. Capability prompts are the first twelve
// held-out math problems.
struct TaskSuite {
  ToyLanguage lang;
  MathTaskSpec math;
  IdentityTaskSpec identity;
};

TaskSuite make_task_suite(std::uint64_t split_seed = 0);

// Default toy policy: a two-layer transformer sized for the suite.
policy::Architecture toy_architecture(const ToyLanguage& lang);

// Training prompts with their privileged context: the identity prompts with
// the persona paragraph, or the training math problems with their traces.
std::vector<rollout::PromptItem> training_items(const TaskSuite& suite, Axis axis);

}  // namespace privdistill::tasks
