#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace privdistill::policy {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Where privileged tokens are spliced into the conditioning prefix.
enum class AttachmentMode { kNone, kSystem, kUserPrefix };

std::string_view to_string(AttachmentMode mode);
AttachmentMode attachment_mode_from_string(std::string_view name);

struct ContextAttachment {
  AttachmentMode mode = AttachmentMode::kNone;
  TokenSequence privileged;

  static ContextAttachment none() { return {}; }

  // Throws ConfigError when mode is kNone but tokens are present.
  void validate() const;
};

}  // namespace privdistill::policy
