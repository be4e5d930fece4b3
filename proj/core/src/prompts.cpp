#include "ace/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ace/errors.hpp"

namespace ace {

namespace {

const char* kGeneratorSystem = R"(You are the Generator. You solve tasks with the help of a playbook of
accumulated knowledge. Bullets are labeled with ids like pb-00001.
{{preamble}})";

const char* kGeneratorUser = R"(Playbook:
{{playbook}}

Query:
{{query}}

Think step by step, then finish with a line:
FINAL: <your answer>
If playbook bullets guided you, add a line "USED: id, id, ...".
If any bullet misled you, add a line "MISLED: id, id, ...".)";

const char* kReflectorSystem =
    R"(You are the Reflector. You critique a task trajectory and distill concrete,
reusable lessons. Respond with a single JSON object:
{"insights":[{"kind":"strategy|pitfall|domain_fact|correction","text":"...","section":"..."}],
 "marks":[{"id":"pb-00001","tag":"helpful|harmful"}],
 "done":false}
Set "done" to true when no further refinement would help.)";

const char* kReflectorUser = R"(Trajectory:
{{trajectory}}
{{feedback}}
{{prior}}
Extract the lessons as JSON.)";

const char* kCuratorSystem =
    R"(You are the Curator. You turn reflected lessons into playbook update
operations. Prefer MARKing an existing bullet over re-adding near-identical
content. Respond with a single JSON object:
{"ops":[{"op":"ADD","section":"...","content":"..."},
        {"op":"MARK","id":"pb-00001","tag":"helpful|harmful"}]})";

const char* kCuratorUser = R"(Lessons:
{{insights}}

Existing playbook bullets (id: first 80 chars):
{{digest}}

Emit the update operations as JSON.)";

}  // namespace

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary lib;
  lib.templates_ = {
      {"generator_system", kGeneratorSystem},
      {"generator_user", kGeneratorUser},
      {"reflector_system", kReflectorSystem},
      {"reflector_user", kReflectorUser},
      {"curator_system", kCuratorSystem},
      {"curator_user", kCuratorUser},
  };
  return lib;
}

PromptLibrary PromptLibrary::load_dir(const std::string& dir) {
  PromptLibrary lib = defaults();
  for (auto& [name, text] : lib.templates_) {
    std::filesystem::path p = std::filesystem::path(dir) / (name + ".txt");
    if (!std::filesystem::exists(p)) continue;
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return lib;
}

const std::string& PromptLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("unknown prompt template: " + name);
  return it->second;
}

void PromptLibrary::set(const std::string& name, std::string text) {
  templates_[name] = std::move(text);
}

std::string PromptLibrary::expand(
    const std::string& name,
    const std::map<std::string, std::string>& vars) const {
  return expand_template(get(name), vars);
}

std::string expand_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out = tmpl;
  for (const auto& [key, value] : vars) {
    const std::string slot = "{{" + key + "}}";
    size_t pos = 0;
    while ((pos = out.find(slot, pos)) != std::string::npos) {
      out.replace(pos, slot.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace ace
