// Next-token MLP over a fixed window of the most recent tokens:
//   h = tanh(concat(emb[t_{i-W+1}], ..., emb[t_i]) W1 + b1),  logits = h W2 + b2
// Positions before the start of the sequence read the PAD embedding (id 0).

#include <cmath>
#include <vector>

#include "kernels.hpp"
#include "networks.hpp"
#include "privdistill/common/errors.hpp"

namespace privdistill::policy {
namespace {

struct WindowCache final : NetworkCache {
  std::vector<TokenId> tokens;
  std::vector<double> input;   // m x (W*E)
  std::vector<double> hidden;  // m x H
};

class WindowMlp final : public Network {
 public:
  explicit WindowMlp(const Architecture& arch) : arch_(arch) {
    const auto V = static_cast<std::size_t>(arch.vocab_size);
    const auto E = static_cast<std::size_t>(arch.embed_dim);
    const auto W = static_cast<std::size_t>(arch.window);
    const auto H = static_cast<std::size_t>(arch.hidden);
    emb_ = 0;
    w1_ = emb_ + V * E;
    b1_ = w1_ + W * E * H;
    w2_ = b1_ + H;
    b2_ = w2_ + H * V;
  }

  const Architecture& arch() const override { return arch_; }

  ForwardPass forward(std::span<const double> params, std::span<const TokenId> tokens,
                      std::size_t first_output) const override {
    const std::size_t n = tokens.size();
    if (n == 0 || first_output >= n) {
      throw LengthError("forward pass needs at least one output position");
    }
    if (n > static_cast<std::size_t>(arch_.context_length)) {
      throw LengthError("sequence of length " + std::to_string(n) + " exceeds context length " +
                        std::to_string(arch_.context_length));
    }
    const auto V = static_cast<std::size_t>(arch_.vocab_size);
    const auto E = static_cast<std::size_t>(arch_.embed_dim);
    const auto W = static_cast<std::size_t>(arch_.window);
    const auto H = static_cast<std::size_t>(arch_.hidden);
    for (TokenId t : tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= V) {
        throw DomainError("token id " + std::to_string(t) + " outside vocabulary");
      }
    }
    const double* P = params.data();
    const std::size_t m = n - first_output;

    auto cache = std::make_unique<WindowCache>();
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->input.assign(m * W * E, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t pos = first_output + r;
      for (std::size_t w = 0; w < W; ++w) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(pos + w) - static_cast<std::ptrdiff_t>(W - 1);
        const std::size_t t = src < 0 ? 0 : static_cast<std::size_t>(tokens[static_cast<std::size_t>(src)]);
        const double* e = P + emb_ + t * E;
        std::copy(e, e + E, &cache->input[(r * W + w) * E]);
      }
    }
    cache->hidden.assign(m * H, 0.0);
    kernels::linear_forward(cache->input.data(), m, W * E, P + w1_, P + b1_, H, cache->hidden.data());
    for (double& h : cache->hidden) {
      h = std::tanh(h);
    }
    ForwardPass pass;
    pass.first_output = first_output;
    pass.logits = Matrix(m, V);
    kernels::linear_forward(cache->hidden.data(), m, H, P + w2_, P + b2_, V, pass.logits.data.data());
    pass.cache = std::move(cache);
    return pass;
  }

  void backward(std::span<const double> params, const ForwardPass& pass, const Matrix& dlogits,
                std::span<double> grad) const override {
    const auto& cache = dynamic_cast<const WindowCache&>(*pass.cache);
    const std::size_t first = pass.first_output;
    const std::size_t m = cache.tokens.size() - first;
    const auto V = static_cast<std::size_t>(arch_.vocab_size);
    const auto E = static_cast<std::size_t>(arch_.embed_dim);
    const auto W = static_cast<std::size_t>(arch_.window);
    const auto H = static_cast<std::size_t>(arch_.hidden);
    if (dlogits.rows != m || dlogits.cols != V) {
      throw ShapeError("dlogits shape does not match forward pass");
    }
    const double* P = params.data();
    double* G = grad.data();

    std::vector<double> dh(m * H, 0.0);
    kernels::linear_backward(cache.hidden.data(), m, H, P + w2_, V, dlogits.data.data(), dh.data(),
                             G + w2_, G + b2_);
    for (std::size_t i = 0; i < m * H; ++i) {
      dh[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
    }
    std::vector<double> dinput(m * W * E, 0.0);
    kernels::linear_backward(cache.input.data(), m, W * E, P + w1_, H, dh.data(), dinput.data(),
                             G + w1_, G + b1_);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t pos = first + r;
      for (std::size_t w = 0; w < W; ++w) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(pos + w) - static_cast<std::ptrdiff_t>(W - 1);
        const std::size_t t = src < 0 ? 0 : static_cast<std::size_t>(cache.tokens[static_cast<std::size_t>(src)]);
        kernels::axpy(1.0, &dinput[(r * W + w) * E], G + emb_ + t * E, E);
      }
    }
  }

  void initialize(std::span<double> params, Rng& rng, double stddev,
                  bool zero_output_head) const override {
    for (double& v : params) {
      v = stddev * rng.normal();
    }
    const auto V = static_cast<std::size_t>(arch_.vocab_size);
    const auto H = static_cast<std::size_t>(arch_.hidden);
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(b1_), H, 0.0);
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(b2_), V, 0.0);
    if (zero_output_head) {
      std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(w2_), H * V, 0.0);
    }
  }

 private:
  Architecture arch_;
  std::size_t emb_, w1_, b1_, w2_, b2_;
};

}  // namespace

std::unique_ptr<Network> make_window_mlp(const Architecture& arch) {
  return std::make_unique<WindowMlp>(arch);
}

std::unique_ptr<Network> make_network(const Architecture& arch) {
  arch.validate();
  if (arch.kind == ArchKind::kWindowMlp) {
    return make_window_mlp(arch);
  }
  return make_transformer(arch);
}

}  // namespace privdistill::policy
