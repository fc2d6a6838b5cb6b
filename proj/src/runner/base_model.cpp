#include "privdistill/runner/base_model.hpp"

#include <cstdlib>

#include <fmt/format.h>

#include "privdistill/common/errors.hpp"
#include "privdistill/policy/checkpoint.hpp"

namespace privdistill::runner {

nlohmann::json BaseSpec::to_json(const policy::Architecture& arch) const {
  return nlohmann::json{{"split_seed", split_seed}, {"corpus", corpus}, {"pretrain", pretrain}, {"arch", arch}};
}

std::string BaseSpec::digest(const policy::Architecture& arch) const {
  // FNV-1a over the canonical JSON dump.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(arch).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("PRIVDISTILL_OUT"); env && *env) return env;
  return "runs";
}

BaseModel ensure_base(const std::filesystem::path& root, const tasks::TaskSuite& suite, const policy::Policy& pol,
                      const BaseSpec& spec, std::size_t workers, const std::function<void(const std::string&)>& log) {
  BaseModel b;
  b.digest = spec.digest(pol.arch());
  b.path = root / "base" / ("base-" + b.digest + ".ckpt");
  if (std::filesystem::exists(b.path)) {
    const auto ckpt = policy::load_checkpoint(b.path);
    b.params = ckpt.params();
    b.eval = ckpt.meta.at("eval").get<tasks::EvalResult>();
    b.from_cache = true;
    return b;
  }

  if (log) log(fmt::format("pretraining base {} ({} steps)", b.digest, spec.pretrain.steps));
  const auto corpus = tasks::build_base_corpus(suite, spec.corpus);
  tasks::PretrainOptions opts = spec.pretrain;
  opts.workers = workers;
  b.params = tasks::pretrain(pol, corpus, opts, [&](int step, double loss) {
    if (log && step % 500 == 0) log(fmt::format("  pretrain step {} loss {:.4f}", step, loss));
  });

  tasks::EvalOptions eo;
  eo.workers = workers;
  b.eval = tasks::evaluate_checkpoint(pol, b.params, suite, eo);
  const double chance = 1.0 / tasks::ToyLanguage::kModulus;
  if (b.eval.identity.counter_name < kBaseMinCounter || b.eval.identity.edge_selfname >= kBaseMaxTarget ||
      b.eval.math_acc <= chance) {
    throw TaskConstructionError(fmt::format(
        "pretrained base misses its thresholds: counter_name {:.3f} (need >= {}), target self-name {:.3f} "
        "(need < {}), math accuracy {:.3f} (need > {:.3f})",
        b.eval.identity.counter_name, kBaseMinCounter, b.eval.identity.edge_selfname, kBaseMaxTarget,
        b.eval.math_acc, chance));
  }

  policy::Checkpoint ckpt;
  ckpt.arch = pol.arch();
  ckpt.seed = spec.pretrain.seed;
  ckpt.meta = {{"kind", "base"}, {"spec", spec.to_json(pol.arch())}, {"eval", b.eval}};
  ckpt.blocks.emplace_back("params", b.params.values);
  std::filesystem::create_directories(b.path.parent_path());
  policy::save_checkpoint(b.path, ckpt);
  return b;
}

Workspace open_workspace(const std::filesystem::path& root, std::size_t workers,
                         const std::function<void(const std::string&)>& log) {
  tasks::TaskSuite suite = tasks::make_task_suite();
  policy::Policy pol(suite.lang.vocab(), tasks::toy_architecture(suite.lang));
  BaseModel base = ensure_base(root, suite, pol, BaseSpec{}, workers, log);
  return Workspace{std::move(suite), std::move(pol), std::move(base)};
}

}  // namespace privdistill::runner
