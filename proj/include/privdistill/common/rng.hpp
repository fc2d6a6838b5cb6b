#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace privdistill {

// Every stochastic decision in a run draws from a stream keyed by integer
// coordinates (run seed, step, prompt index, ...), so results do not depend on
// thread count or call order and a resumed run replays the same draws.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits; portable across standard libraries.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stream tags, so two purposes never share a derived seed.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kBatch = 2;
inline constexpr std::uint64_t kGuide = 3;
inline constexpr std::uint64_t kSample = 4;
inline constexpr std::uint64_t kEval = 5;
inline constexpr std::uint64_t kCorpus = 6;
inline constexpr std::uint64_t kSplit = 7;
}  // namespace stream

}  // namespace privdistill
