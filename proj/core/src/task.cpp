#include "ace/task.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ace/errors.hpp"
#include "json.hpp"

namespace ace {

bool exact_match(const std::string& prediction, const std::string& label,
                 bool strict) {
  if (strict) return prediction == label;
  auto normalize = [](const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : s) {
      if (std::isspace(c)) {
        pending_space = !out.empty();
        continue;
      }
      if (pending_space) {
        out += ' ';
        pending_space = false;
      }
      out += static_cast<char>(std::tolower(c));
    }
    return out;
  };
  return normalize(prediction) == normalize(label);
}

bool TaskAdapter::judge(const std::string& prediction,
                        const std::string& label) const {
  return exact_match(prediction, label);
}

ExecutionFeedback TaskAdapter::execute(const Sample&,
                                       const std::string&) const {
  throw ConfigError("task adapter does not support execution feedback");
}

std::vector<Sample> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read task file: " + path);
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("task file line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    Sample s;
    s.id = j.value("id", "");
    s.query = j.value("query", "");
    if (s.id.empty() || s.query.empty())
      throw ParseError("task file line " + std::to_string(lineno) +
                       ": id and query are required");
    if (j.contains("label") && !j["label"].is_null())
      s.label = j["label"].get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

void save_samples(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write task file: " + path);
  for (const auto& s : samples) {
    nlohmann::ordered_json j{{"id", s.id}, {"query", s.query}};
    if (s.label) j["label"] = *s.label;
    out << j.dump() << "\n";
  }
}

}  // namespace ace
