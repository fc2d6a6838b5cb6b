#include "privdistill/policy/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "privdistill/common/errors.hpp"

namespace privdistill::policy {
namespace {

constexpr const char* kFormat = "privdistill-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) {
      out = (out << 8) | ((v >> (8 * i)) & 0xFF);
    }
    return out;
  }
}

void write_u64(std::ostream& os, std::uint64_t v) {
  const std::uint64_t le = to_little(v);
  char buf[8];
  std::memcpy(buf, &le, 8);
  os.write(buf, 8);
}

std::uint64_t read_u64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) {
    throw IoError("truncated checkpoint");
  }
  std::uint64_t le = 0;
  std::memcpy(&le, buf, 8);
  return to_little(le);
}

}  // namespace

const std::vector<double>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, values] : blocks) {
    if (n == name) {
      return &values;
    }
  }
  return nullptr;
}

PolicyParams Checkpoint::params() const {
  const auto* values = find("params");
  if (values == nullptr) {
    throw IoError("checkpoint has no params block");
  }
  PolicyParams p{arch, *values};
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["arch"] = ckpt.arch;
  header["seed"] = ckpt.seed;
  header["step"] = ckpt.step;
  header["meta"] = ckpt.meta;
  header["blocks"] = nlohmann::json::array();
  for (const auto& [name, values] : ckpt.blocks) {
    header["blocks"].push_back({{"name", name}, {"count", values.size()}});
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  // Write to a sibling and rename so a crash never leaves a torn checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw IoError("cannot open " + tmp.string() + " for writing");
    }
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& block : ckpt.blocks) {
      for (double v : block.second) {
        write_u64(os, std::bit_cast<std::uint64_t>(v));
      }
    }
    if (!os) {
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open checkpoint " + path.string());
  }
  const std::uint64_t n = read_u64(is);
  std::string text(n, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(n))) {
    throw IoError("truncated checkpoint header");
  }
  const auto header = nlohmann::json::parse(text);
  if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
    throw IoError("unrecognized checkpoint format in " + path.string());
  }
  Checkpoint ckpt;
  ckpt.arch = header.at("arch").get<Architecture>();
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.step = header.at("step").get<std::int64_t>();
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& b : header.at("blocks")) {
    std::vector<double> values(b.at("count").get<std::size_t>());
    for (double& v : values) {
      v = std::bit_cast<double>(read_u64(is));
    }
    ckpt.blocks.emplace_back(b.at("name").get<std::string>(), std::move(values));
  }
  return ckpt;
}

void save_params(const std::filesystem::path& path, const PolicyParams& params, std::uint64_t seed,
                 std::int64_t step) {
  params.validate();
  Checkpoint ckpt;
  ckpt.arch = params.arch;
  ckpt.seed = seed;
  ckpt.step = step;
  ckpt.blocks.emplace_back("params", params.values);
  save_checkpoint(path, ckpt);
}

PolicyParams load_params(const std::filesystem::path& path) {
  return load_checkpoint(path).params();
}

}  // namespace privdistill::policy
