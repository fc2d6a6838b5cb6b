#include "privdistill/policy/architecture.hpp"

#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::policy {

std::string_view to_string(ArchKind kind) {
  return kind == ArchKind::kTransformer ? "transformer" : "window_mlp";
}

ArchKind arch_kind_from_string(std::string_view name) {
  if (name == "transformer") return ArchKind::kTransformer;
  if (name == "window_mlp") return ArchKind::kWindowMlp;
  throw ConfigError("unknown architecture kind: " + std::string(name));
}

Architecture Architecture::transformer(int vocab_size, int context_length, int d_model, int n_heads,
                                       int n_layers, int d_ff) {
  Architecture a;
  a.kind = ArchKind::kTransformer;
  a.vocab_size = vocab_size;
  a.context_length = context_length;
  a.d_model = d_model;
  a.n_heads = n_heads;
  a.n_layers = n_layers;
  a.d_ff = d_ff;
  a.validate();
  return a;
}

Architecture Architecture::window_mlp(int vocab_size, int context_length, int window, int embed_dim,
                                      int hidden) {
  Architecture a;
  a.kind = ArchKind::kWindowMlp;
  a.vocab_size = vocab_size;
  a.context_length = context_length;
  a.window = window;
  a.embed_dim = embed_dim;
  a.hidden = hidden;
  a.validate();
  return a;
}

void Architecture::validate() const {
  if (vocab_size <= 0 || context_length <= 0) {
    throw ConfigError("vocabulary size and context length must be positive");
  }
  if (kind == ArchKind::kTransformer) {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0) {
      throw ConfigError("transformer sizes must be positive");
    }
    if (d_model % n_heads != 0) {
      throw ConfigError("d_model must be divisible by n_heads");
    }
  } else {
    if (window <= 0 || embed_dim <= 0 || hidden <= 0) {
      throw ConfigError("window MLP sizes must be positive");
    }
  }
}

std::size_t Architecture::param_count() const {
  const auto V = static_cast<std::size_t>(vocab_size);
  if (kind == ArchKind::kWindowMlp) {
    const auto E = static_cast<std::size_t>(embed_dim);
    const auto H = static_cast<std::size_t>(hidden);
    const auto W = static_cast<std::size_t>(window);
    return V * E + W * E * H + H + H * V + V;
  }
  const auto d = static_cast<std::size_t>(d_model);
  const auto f = static_cast<std::size_t>(d_ff);
  const auto L = static_cast<std::size_t>(context_length);
  const std::size_t per_layer = d + d * 3 * d + 3 * d + d * d + d + d + d * f + f + f * d + d;
  return V * d + L * d + static_cast<std::size_t>(n_layers) * per_layer + d + d * V + V;
}

void to_json(nlohmann::json& j, const Architecture& a) {
  j = nlohmann::json{{"kind", std::string(to_string(a.kind))},
                     {"vocab_size", a.vocab_size},
                     {"context_length", a.context_length}};
  if (a.kind == ArchKind::kTransformer) {
    j["d_model"] = a.d_model;
    j["n_heads"] = a.n_heads;
    j["n_layers"] = a.n_layers;
    j["d_ff"] = a.d_ff;
  } else {
    j["window"] = a.window;
    j["embed_dim"] = a.embed_dim;
    j["hidden"] = a.hidden;
  }
}

void from_json(const nlohmann::json& j, Architecture& a) {
  a = Architecture{};
  a.kind = arch_kind_from_string(j.at("kind").get<std::string>());
  a.vocab_size = j.at("vocab_size").get<int>();
  a.context_length = j.at("context_length").get<int>();
  if (a.kind == ArchKind::kTransformer) {
    a.d_model = j.at("d_model").get<int>();
    a.n_heads = j.at("n_heads").get<int>();
    a.n_layers = j.at("n_layers").get<int>();
    a.d_ff = j.at("d_ff").get<int>();
  } else {
    a.window = j.at("window").get<int>();
    a.embed_dim = j.at("embed_dim").get<int>();
    a.hidden = j.at("hidden").get<int>();
  }
  a.validate();
}

}  // namespace privdistill::policy
