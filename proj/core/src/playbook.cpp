#include "ace/playbook.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ace/errors.hpp"
#include "json.hpp"

namespace ace {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

bool is_valid_bullet_id(std::string_view id) {
  if (id.size() < 4 || id.substr(0, 3) != "pb-") return false;
  return std::all_of(id.begin() + 3, id.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

int bullet_id_number(std::string_view id) {
  if (!is_valid_bullet_id(id)) throw ValidationError("invalid bullet id: " + std::string(id));
  int n = 0;
  auto digits = id.substr(3);
  std::from_chars(digits.data(), digits.data() + digits.size(), n);
  return n;
}

std::string format_bullet_id(int n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "pb-%05d", n);
  return buf;
}

Playbook::Playbook(std::vector<std::string> sections, int token_budget)
    : sections_(std::move(sections)), token_budget_(token_budget) {}

const Bullet* Playbook::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return nullptr;
  return &bullets_[it->second];
}

bool Playbook::has_section(std::string_view section) const {
  return std::find(sections_.begin(), sections_.end(), section) !=
         sections_.end();
}

const Bullet& Playbook::append_bullet(const std::string& section,
                                      const std::string& content,
                                      int at_step) {
  if (!has_section(section)) throw ValidationError("unknown section: " + section);
  std::string trimmed = trim(content);
  if (trimmed.empty()) throw ValidationError("bullet content empty");
  Bullet b;
  b.id = format_bullet_id(next_id_++);
  b.section = section;
  b.content = trimmed;
  b.created_step = at_step;
  b.last_touched_step = at_step;
  bullets_.push_back(std::move(b));
  index_[bullets_.back().id] = bullets_.size() - 1;
  return bullets_.back();
}

bool Playbook::mark(std::string_view id, bool helpful, int at_step) {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return false;
  Bullet& b = bullets_[it->second];
  if (helpful)
    ++b.helpful;
  else
    ++b.harmful;
  b.last_touched_step = std::max(b.last_touched_step, at_step);
  return true;
}

void Playbook::ensure_section(const std::string& section) {
  if (!has_section(section)) sections_.push_back(section);
}

void Playbook::replace_bullets(std::vector<Bullet> bullets) {
  bullets_ = std::move(bullets);
  reindex();
}

void Playbook::advance_step(int by) {
  if (by < 0) throw ValidationError("step may not decrease");
  step_ += by;
}

void Playbook::reindex() {
  index_.clear();
  for (size_t i = 0; i < bullets_.size(); ++i) index_[bullets_[i].id] = i;
}

Playbook Playbook::from_parts(std::vector<std::string> sections,
                              std::vector<Bullet> bullets, int next_id,
                              int step, int token_budget) {
  if (sections.empty()) throw ParseError("sections: must be non-empty");
  if (token_budget <= 0) throw ParseError("token_budget: must be positive");
  if (next_id < 1) throw ParseError("next_id: must be >= 1");
  if (step < 0) throw ParseError("step: must be non-negative");
  Playbook pb(std::move(sections), token_budget);
  for (const auto& b : bullets) {
    if (!is_valid_bullet_id(b.id))
      throw ParseError("bullet id malformed: " + b.id);
    if (bullet_id_number(b.id) >= next_id)
      throw ParseError("bullet id " + b.id + " not below next_id");
    if (!pb.has_section(b.section))
      throw ParseError("bullet " + b.id + ": unknown section " + b.section);
    if (b.helpful < 0 || b.harmful < 0)
      throw ParseError("bullet " + b.id + ": negative counter");
    if (b.last_touched_step < b.created_step)
      throw ParseError("bullet " + b.id + ": last_touched before created");
    if (trim(b.content).empty())
      throw ParseError("bullet " + b.id + ": empty content");
    if (pb.find(b.id) != nullptr)
      throw ParseError("duplicate bullet id: " + b.id);
    pb.bullets_.push_back(b);
    pb.index_[b.id] = pb.bullets_.size() - 1;
  }
  pb.next_id_ = next_id;
  pb.step_ = step;
  return pb;
}

Playbook new_playbook(std::vector<std::string> sections, int token_budget) {
  if (sections.empty()) throw ConfigError("playbook needs at least one section");
  if (token_budget <= 0) throw ConfigError("token_budget must be positive");
  return Playbook(std::move(sections), token_budget);
}

std::string render(const Playbook& pb) {
  std::ostringstream out;
  bool first = true;
  for (const auto& section : pb.sections()) {
    if (!first) out << "\n";
    first = false;
    out << "## " << section << "\n";
    bool any = false;
    for (const auto& b : pb.bullets()) {
      if (b.section != section) continue;
      out << "[" << b.id << " helpful=" << b.helpful << " harmful=" << b.harmful
          << "] " << b.content << "\n";
      any = true;
    }
    if (!any) out << "(empty)\n";
  }
  std::string s = out.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

int token_count(const Playbook& pb, const TokenCounter& counter) {
  return counter(render(pb));
}

std::string to_document(const Playbook& pb) {
  ordered_json doc;
  doc["format_version"] = kFormatVersion;
  doc["sections"] = pb.sections();
  doc["next_id"] = pb.next_id();
  doc["step"] = pb.step();
  doc["token_budget"] = pb.token_budget();
  doc["bullets"] = ordered_json::array();
  for (const auto& b : pb.bullets()) {
    doc["bullets"].push_back({{"id", b.id},
                              {"section", b.section},
                              {"content", b.content},
                              {"helpful", b.helpful},
                              {"harmful", b.harmful},
                              {"created_step", b.created_step},
                              {"last_touched_step", b.last_touched_step}});
  }
  return doc.dump(2) + "\n";
}

void save(const Playbook& pb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write playbook file: " + path);
  out << to_document(pb);
  if (!out) throw ConfigError("write failed: " + path);
}

Playbook from_document(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("playbook document: ") + e.what());
  }
  try {
    int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion)
      throw UnsupportedVersionError("unsupported playbook format_version " +
                                    std::to_string(version));
    std::vector<Bullet> bullets;
    for (const auto& jb : doc.at("bullets")) {
      Bullet b;
      b.id = jb.at("id").get<std::string>();
      b.section = jb.at("section").get<std::string>();
      b.content = jb.at("content").get<std::string>();
      b.helpful = jb.at("helpful").get<int>();
      b.harmful = jb.at("harmful").get<int>();
      b.created_step = jb.at("created_step").get<int>();
      b.last_touched_step = jb.at("last_touched_step").get<int>();
      bullets.push_back(std::move(b));
    }
    return Playbook::from_parts(
        doc.at("sections").get<std::vector<std::string>>(), std::move(bullets),
        doc.at("next_id").get<int>(), doc.at("step").get<int>(),
        doc.at("token_budget").get<int>());
  } catch (const UnsupportedVersionError&) {
    throw;
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("playbook document: ") + e.what());
  }
}

Playbook load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read playbook file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_document(ss.str());
}

}  // namespace ace
