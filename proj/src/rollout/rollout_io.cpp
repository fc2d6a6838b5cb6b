#include "privdistill/rollout/rollout_io.hpp"

#include <fstream>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::rollout {

void to_json(nlohmann::json& j, const Rollout& r) {
  j = nlohmann::json{{"prompt", r.prompt},
                     {"privileged", r.privileged},
                     {"response", r.response},
                     {"attachment", std::string(policy::to_string(r.attachment))},
                     {"guided", r.guided},
                     {"truncated", r.truncated},
                     {"group", r.group},
                     {"logp_student_plain", r.logp_student_plain},
                     {"logp_teacher_priv", r.logp_teacher_priv},
                     {"logp_teacher_plain", r.logp_teacher_plain},
                     {"logp_base_plain", r.logp_base_plain},
                     {"logp_behavior", r.logp_behavior}};
}

void from_json(const nlohmann::json& j, Rollout& r) {
  r.prompt = j.at("prompt").get<TokenSequence>();
  r.privileged = j.at("privileged").get<TokenSequence>();
  r.response = j.at("response").get<TokenSequence>();
  r.attachment = policy::attachment_mode_from_string(j.at("attachment").get<std::string>());
  r.guided = j.at("guided").get<bool>();
  r.truncated = j.value("truncated", false);
  r.group = j.value("group", std::int64_t{0});
  r.logp_student_plain = j.at("logp_student_plain").get<std::vector<double>>();
  r.logp_teacher_priv = j.at("logp_teacher_priv").get<std::vector<double>>();
  r.logp_teacher_plain = j.at("logp_teacher_plain").get<std::vector<double>>();
  r.logp_base_plain = j.at("logp_base_plain").get<std::vector<double>>();
  r.logp_behavior = j.value("logp_behavior", std::vector<double>{});
  r.validate();
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<nlohmann::json> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) {
      continue;
    }
    rows.push_back(nlohmann::json::parse(line));
  }
  return rows;
}

}  // namespace privdistill::rollout
