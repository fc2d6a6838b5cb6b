#pragma once

// Test-only oracles. Nothing here calls into the code paths it is used to check
// beyond the plain forward evaluation it perturbs.

#include <cmath>
#include <functional>
#include <vector>

#include "privdistill/common/rng.hpp"
#include "privdistill/policy/policy.hpp"

namespace privdistill::testing {

inline policy::Vocabulary tiny_vocab(int size) {
  return policy::Vocabulary(size, policy::Vocabulary::Specials{0, 1, 2, 3});
}

// Central differences of f around x, step h, for every coordinate.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Relative error per coordinate, skipping coordinates where both gradients are
// below `floor` in magnitude.
inline GradCheckResult compare_gradients(const std::vector<double>& analytic,
                                         const std::vector<double>& numeric, double floor = 1e-8) {
  GradCheckResult r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale < floor) {
      continue;
    }
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[i] - numeric[i]) / scale);
    ++r.checked;
  }
  return r;
}

inline policy::TokenSequence random_tokens(Rng& rng, std::size_t n, int lo, int vocab) {
  policy::TokenSequence t(n);
  for (auto& v : t) {
    v = static_cast<policy::TokenId>(lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab - lo))));
  }
  return t;
}

}  // namespace privdistill::testing
