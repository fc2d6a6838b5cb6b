#pragma once

#include <cstdint>
#include <vector>

#include "privdistill/policy/architecture.hpp"

namespace privdistill::policy {

// Flat parameter vector plus the architecture that gives it meaning.
struct PolicyParams {
  Architecture arch;
  std::vector<double> values;

  // Throws ConfigError on a size mismatch, NumericError on non-finite entries.
  void validate() const;
};

struct InitOptions {
  double stddev = 0.02;
  // Zero the output head so every next-token distribution starts uniform.
  bool zero_output_head = false;
};

// Normal(0, stddev) weights, unit norm gains, zero biases.
PolicyParams init_params(const Architecture& arch, std::uint64_t seed, InitOptions options = {});

}  // namespace privdistill::policy
