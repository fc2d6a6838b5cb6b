#include "privdistill/common/rng.hpp"

#include <cmath>
#include <numbers>

namespace privdistill {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t c : coords) {
    h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
  }
  return h;
}

double Rng::normal() {
  // Box-Muller on our own uniforms; std::normal_distribution is not portable.
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) {
    return 0;
  }
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % n;
}

}  // namespace privdistill
