#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "privdistill/common/matrix.hpp"
#include "privdistill/common/rng.hpp"
#include "privdistill/policy/architecture.hpp"
#include "privdistill/policy/tokens.hpp"

namespace privdistill::policy {

struct NetworkCache {
  virtual ~NetworkCache() = default;
};

// Result of a causal forward pass. Row r of `logits` is the next-token
// prediction after tokens[0 .. first_output + r].
struct ForwardPass {
  Matrix logits;
  std::size_t first_output = 0;
  std::unique_ptr<NetworkCache> cache;
};

// Stateless evaluator for one architecture; parameters are passed per call so a
// single instance serves student, teacher and base weights concurrently.
class Network {
 public:
  virtual ~Network() = default;

  virtual const Architecture& arch() const = 0;

  virtual ForwardPass forward(std::span<const double> params, std::span<const TokenId> tokens,
                              std::size_t first_output) const = 0;

  // Accumulates d(sum dlogits * logits)/d(params) into grad.
  virtual void backward(std::span<const double> params, const ForwardPass& pass,
                        const Matrix& dlogits, std::span<double> grad) const = 0;

  // Initial values: Normal(0, stddev) for weights, 1 for norm gains, 0 for biases.
  virtual void initialize(std::span<double> params, Rng& rng, double stddev,
                          bool zero_output_head) const = 0;
};

std::unique_ptr<Network> make_network(const Architecture& arch);

}  // namespace privdistill::policy
