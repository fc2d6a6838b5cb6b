#include "privdistill/policy/params.hpp"

#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"
#include "privdistill/common/rng.hpp"
#include "privdistill/policy/network.hpp"

namespace privdistill::policy {

void PolicyParams::validate() const {
  arch.validate();
  if (values.size() != arch.param_count()) {
    throw ConfigError("parameter count " + std::to_string(values.size()) +
                      " does not match architecture (" + std::to_string(arch.param_count()) + ")");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite parameter value");
    }
  }
}

PolicyParams init_params(const Architecture& arch, std::uint64_t seed, InitOptions options) {
  arch.validate();
  PolicyParams p{arch, std::vector<double>(arch.param_count(), 0.0)};
  Rng rng(derive_seed(seed, {stream::kInit}));
  make_network(arch)->initialize(p.values, rng, options.stddev, options.zero_output_head);
  return p;
}

}  // namespace privdistill::policy
