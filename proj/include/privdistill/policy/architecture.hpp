#pragma once

#include <cstddef>
#include <string_view>

#include <json.hpp>

namespace privdistill::policy {

enum class ArchKind {
  kTransformer,  // causal self-attention stack, the default trainable policy
  kWindowMlp,    // MLP over the last `window` tokens, small enough to enumerate
};

std::string_view to_string(ArchKind kind);
ArchKind arch_kind_from_string(std::string_view name);

struct Architecture {
  ArchKind kind = ArchKind::kTransformer;
  int vocab_size = 0;
  int context_length = 128;

  // transformer
  int d_model = 64;
  int n_heads = 2;
  int n_layers = 2;
  int d_ff = 256;

  // window MLP
  int window = 4;
  int embed_dim = 8;
  int hidden = 16;

  static Architecture transformer(int vocab_size, int context_length = 128, int d_model = 64,
                                  int n_heads = 2, int n_layers = 2, int d_ff = 256);
  static Architecture window_mlp(int vocab_size, int context_length = 4, int window = 4,
                                 int embed_dim = 8, int hidden = 16);

  // Throws ConfigError on inconsistent sizes.
  void validate() const;
  std::size_t param_count() const;

  bool operator==(const Architecture&) const = default;
};

void to_json(nlohmann::json& j, const Architecture& arch);
void from_json(const nlohmann::json& j, Architecture& arch);

}  // namespace privdistill::policy
