// Pre-norm causal transformer with explicit reverse-mode gradients.
//
//   x0 = tok_emb[t] + pos_emb[p]
//   x  = x + Attn(RMSNorm(x)) ; x = x + MLP(RMSNorm(x))   (per layer)
//   logits = RMSNorm(x) W_out + b_out

#include <algorithm>
#include <cmath>
#include <vector>

#include "kernels.hpp"
#include "privdistill/common/errors.hpp"
#include "networks.hpp"

namespace privdistill::policy {
namespace {

using kernels::axpy;
using kernels::dot;

struct LayerOffsets {
  std::size_t ln1, w_qkv, b_qkv, w_o, b_o, ln2, w_fc, b_fc, w_proj, b_proj;
};

struct Layout {
  std::size_t tok_emb = 0, pos_emb = 0, lnf = 0, w_out = 0, b_out = 0, total = 0;
  std::vector<LayerOffsets> layers;

  explicit Layout(const Architecture& a) {
    const auto V = static_cast<std::size_t>(a.vocab_size);
    const auto d = static_cast<std::size_t>(a.d_model);
    const auto f = static_cast<std::size_t>(a.d_ff);
    const auto L = static_cast<std::size_t>(a.context_length);
    std::size_t at = 0;
    auto take = [&at](std::size_t n) {
      const std::size_t start = at;
      at += n;
      return start;
    };
    tok_emb = take(V * d);
    pos_emb = take(L * d);
    for (int l = 0; l < a.n_layers; ++l) {
      LayerOffsets o{};
      o.ln1 = take(d);
      o.w_qkv = take(d * 3 * d);
      o.b_qkv = take(3 * d);
      o.w_o = take(d * d);
      o.b_o = take(d);
      o.ln2 = take(d);
      o.w_fc = take(d * f);
      o.b_fc = take(f);
      o.w_proj = take(f * d);
      o.b_proj = take(d);
      layers.push_back(o);
    }
    lnf = take(d);
    w_out = take(d * V);
    b_out = take(V);
    total = at;
  }
};

struct LayerCache {
  std::vector<double> x_in, a, rms1, qkv, probs, att, x_mid, c, rms2, u, g;
};

struct TransformerCache final : NetworkCache {
  std::vector<TokenId> tokens;
  std::vector<LayerCache> layers;
  std::vector<double> x_final, fnorm, rmsf;
};

class Transformer final : public Network {
 public:
  explicit Transformer(const Architecture& arch) : arch_(arch), layout_(arch) {}

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
    const auto d = static_cast<std::size_t>(arch_.d_model);
    const auto f = static_cast<std::size_t>(arch_.d_ff);
    const auto H = static_cast<std::size_t>(arch_.n_heads);
    const std::size_t dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double* P = params.data();

    auto cache = std::make_unique<TransformerCache>();
    cache->tokens.assign(tokens.begin(), tokens.end());

    std::vector<double> x(n * d);
    for (std::size_t p = 0; p < n; ++p) {
      const auto t = static_cast<std::size_t>(tokens[p]);
      if (tokens[p] < 0 || t >= V) {
        throw DomainError("token id " + std::to_string(tokens[p]) + " outside vocabulary");
      }
      const double* te = P + layout_.tok_emb + t * d;
      const double* pe = P + layout_.pos_emb + p * d;
      for (std::size_t i = 0; i < d; ++i) {
        x[p * d + i] = te[i] + pe[i];
      }
    }

    cache->layers.resize(layout_.layers.size());
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
      const LayerOffsets& o = layout_.layers[l];
      LayerCache& lc = cache->layers[l];
      lc.x_in = x;
      lc.a.assign(n * d, 0.0);
      lc.rms1.assign(n, 0.0);
      for (std::size_t p = 0; p < n; ++p) {
        lc.rms1[p] = kernels::rmsnorm_forward(&x[p * d], P + o.ln1, d, &lc.a[p * d]);
      }
      lc.qkv.assign(n * 3 * d, 0.0);
      kernels::linear_forward(lc.a.data(), n, d, P + o.w_qkv, P + o.b_qkv, 3 * d, lc.qkv.data());

      lc.probs.assign(H * n * n, 0.0);
      lc.att.assign(n * d, 0.0);
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
          const double* q = &lc.qkv[i * 3 * d + h * dh];
          double* prow = &lc.probs[(h * n + i) * n];
          double mx = -INFINITY;
          for (std::size_t j = 0; j <= i; ++j) {
            const double* k = &lc.qkv[j * 3 * d + d + h * dh];
            prow[j] = dot(q, k, dh) * scale;
            mx = std::max(mx, prow[j]);
          }
          double z = 0.0;
          for (std::size_t j = 0; j <= i; ++j) {
            prow[j] = std::exp(prow[j] - mx);
            z += prow[j];
          }
          double* out = &lc.att[i * d + h * dh];
          for (std::size_t j = 0; j <= i; ++j) {
            prow[j] /= z;
            axpy(prow[j], &lc.qkv[j * 3 * d + 2 * d + h * dh], out, dh);
          }
        }
      }
      std::vector<double> proj(n * d);
      kernels::linear_forward(lc.att.data(), n, d, P + o.w_o, P + o.b_o, d, proj.data());
      for (std::size_t i = 0; i < n * d; ++i) {
        x[i] += proj[i];
      }
      lc.x_mid = x;

      lc.c.assign(n * d, 0.0);
      lc.rms2.assign(n, 0.0);
      for (std::size_t p = 0; p < n; ++p) {
        lc.rms2[p] = kernels::rmsnorm_forward(&x[p * d], P + o.ln2, d, &lc.c[p * d]);
      }
      lc.u.assign(n * f, 0.0);
      kernels::linear_forward(lc.c.data(), n, d, P + o.w_fc, P + o.b_fc, f, lc.u.data());
      lc.g.resize(n * f);
      for (std::size_t i = 0; i < n * f; ++i) {
        lc.g[i] = kernels::gelu(lc.u[i]);
      }
      kernels::linear_forward(lc.g.data(), n, f, P + o.w_proj, P + o.b_proj, d, proj.data());
      for (std::size_t i = 0; i < n * d; ++i) {
        x[i] += proj[i];
      }
    }

    cache->x_final = x;
    cache->fnorm.assign(n * d, 0.0);
    cache->rmsf.assign(n, 0.0);
    for (std::size_t p = first_output; p < n; ++p) {
      cache->rmsf[p] = kernels::rmsnorm_forward(&x[p * d], P + layout_.lnf, d, &cache->fnorm[p * d]);
    }

    ForwardPass pass;
    pass.first_output = first_output;
    const std::size_t m = n - first_output;
    pass.logits = Matrix(m, V);
    kernels::linear_forward(&cache->fnorm[first_output * d], m, d, P + layout_.w_out,
                            P + layout_.b_out, V, pass.logits.data.data());
    pass.cache = std::move(cache);
    return pass;
  }

  void backward(std::span<const double> params, const ForwardPass& pass, const Matrix& dlogits,
                std::span<double> grad) const override {
    const auto& cache = dynamic_cast<const TransformerCache&>(*pass.cache);
    const std::size_t n = cache.tokens.size();
    const std::size_t first = pass.first_output;
    const std::size_t m = n - first;
    if (dlogits.rows != m || dlogits.cols != static_cast<std::size_t>(arch_.vocab_size)) {
      throw ShapeError("dlogits shape does not match forward pass");
    }
    const auto V = static_cast<std::size_t>(arch_.vocab_size);
    const auto d = static_cast<std::size_t>(arch_.d_model);
    const auto f = static_cast<std::size_t>(arch_.d_ff);
    const auto H = static_cast<std::size_t>(arch_.n_heads);
    const std::size_t dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double* P = params.data();
    double* G = grad.data();

    std::vector<double> dfnorm(n * d, 0.0);
    kernels::linear_backward(&cache.fnorm[first * d], m, d, P + layout_.w_out, V,
                             dlogits.data.data(), &dfnorm[first * d], G + layout_.w_out,
                             G + layout_.b_out);
    std::vector<double> dx(n * d, 0.0);
    for (std::size_t p = first; p < n; ++p) {
      kernels::rmsnorm_backward(&cache.x_final[p * d], P + layout_.lnf, cache.rmsf[p], d,
                                &dfnorm[p * d], &dx[p * d], G + layout_.lnf);
    }

    std::vector<double> dg(n * f), du(n * f), dc(n * d), datt(n * d), dqkv(n * 3 * d), da(n * d);
    for (std::size_t li = layout_.layers.size(); li-- > 0;) {
      const LayerOffsets& o = layout_.layers[li];
      const LayerCache& lc = cache.layers[li];

      // MLP branch: x_out = x_mid + gelu(c W_fc + b_fc) W_proj + b_proj
      std::fill(dg.begin(), dg.end(), 0.0);
      kernels::linear_backward(lc.g.data(), n, f, P + o.w_proj, d, dx.data(), dg.data(),
                               G + o.w_proj, G + o.b_proj);
      for (std::size_t i = 0; i < n * f; ++i) {
        du[i] = dg[i] * kernels::gelu_grad(lc.u[i]);
      }
      std::fill(dc.begin(), dc.end(), 0.0);
      kernels::linear_backward(lc.c.data(), n, d, P + o.w_fc, f, du.data(), dc.data(), G + o.w_fc,
                               G + o.b_fc);
      for (std::size_t p = 0; p < n; ++p) {
        kernels::rmsnorm_backward(&lc.x_mid[p * d], P + o.ln2, lc.rms2[p], d, &dc[p * d],
                                  &dx[p * d], G + o.ln2);
      }

      // Attention branch: x_mid = x_in + attn(a) W_o + b_o
      std::fill(datt.begin(), datt.end(), 0.0);
      kernels::linear_backward(lc.att.data(), n, d, P + o.w_o, d, dx.data(), datt.data(), G + o.w_o,
                               G + o.b_o);
      std::fill(dqkv.begin(), dqkv.end(), 0.0);
      std::vector<double> dp(n);
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
          const double* prow = &lc.probs[(h * n + i) * n];
          const double* dout = &datt[i * d + h * dh];
          double s = 0.0;
          for (std::size_t j = 0; j <= i; ++j) {
            dp[j] = dot(dout, &lc.qkv[j * 3 * d + 2 * d + h * dh], dh);
            s += prow[j] * dp[j];
            axpy(prow[j], dout, &dqkv[j * 3 * d + 2 * d + h * dh], dh);
          }
          const double* q = &lc.qkv[i * 3 * d + h * dh];
          double* dq = &dqkv[i * 3 * d + h * dh];
          for (std::size_t j = 0; j <= i; ++j) {
            const double ds = prow[j] * (dp[j] - s) * scale;
            if (ds != 0.0) {
              axpy(ds, &lc.qkv[j * 3 * d + d + h * dh], dq, dh);
              axpy(ds, q, &dqkv[j * 3 * d + d + h * dh], dh);
            }
          }
        }
      }
      std::fill(da.begin(), da.end(), 0.0);
      kernels::linear_backward(lc.a.data(), n, d, P + o.w_qkv, 3 * d, dqkv.data(), da.data(),
                               G + o.w_qkv, G + o.b_qkv);
      for (std::size_t p = 0; p < n; ++p) {
        kernels::rmsnorm_backward(&lc.x_in[p * d], P + o.ln1, lc.rms1[p], d, &da[p * d], &dx[p * d],
                                  G + o.ln1);
      }
    }

    for (std::size_t p = 0; p < n; ++p) {
      const auto t = static_cast<std::size_t>(cache.tokens[p]);
      axpy(1.0, &dx[p * d], G + layout_.tok_emb + t * d, d);
      axpy(1.0, &dx[p * d], G + layout_.pos_emb + p * d, d);
    }
  }

  void initialize(std::span<double> params, Rng& rng, double stddev,
                  bool zero_output_head) const override {
    for (double& v : params) {
      v = stddev * rng.normal();
    }
    const auto d = static_cast<std::size_t>(arch_.d_model);
    const auto f = static_cast<std::size_t>(arch_.d_ff);
    const auto V = static_cast<std::size_t>(arch_.vocab_size);
    auto fill = [&](std::size_t at, std::size_t count, double value) {
      std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(at), count, value);
    };
    for (const LayerOffsets& o : layout_.layers) {
      fill(o.ln1, d, 1.0);
      fill(o.ln2, d, 1.0);
      fill(o.b_qkv, 3 * d, 0.0);
      fill(o.b_o, d, 0.0);
      fill(o.b_fc, f, 0.0);
      fill(o.b_proj, d, 0.0);
    }
    fill(layout_.lnf, d, 1.0);
    fill(layout_.b_out, V, 0.0);
    if (zero_output_head) {
      fill(layout_.w_out, d * V, 0.0);
    }
  }

 private:
  Architecture arch_;
  Layout layout_;
};

}  // namespace

std::unique_ptr<Network> make_transformer(const Architecture& arch) {
  return std::make_unique<Transformer>(arch);
}

}  // namespace privdistill::policy
