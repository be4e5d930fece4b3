#include "ace/delta.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include "ace/errors.hpp"
#include "json.hpp"

namespace ace {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kCatchAllSection = "general";

bool content_nonempty(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return !std::isspace(c);
  });
}

// Merge one delta into pb in place. Ids created by earlier ADDs of the same
// delta are off limits to its MARKs (the Curator cannot legitimately know
// them; a match would be a lucky guess).
MergeReport apply_delta(Playbook& pb, const DeltaContext& delta) {
  validate_delta(delta);
  pb.advance_step(1);
  const int at_step = pb.step();
  std::set<std::string> batch_ids;
  MergeReport report;
  for (const auto& op : delta.ops) {
    if (const auto* add = std::get_if<AddOp>(&op)) {
      std::string section = add->section;
      bool redirected = false;
      if (!pb.has_section(section)) {
        section = kCatchAllSection;
        pb.ensure_section(section);
        redirected = true;
      }
      const Bullet& b = pb.append_bullet(section, add->content, at_step);
      report.added_ids.push_back(b.id);
      batch_ids.insert(b.id);
      if (redirected)
        report.redirected_adds.push_back({b.id, add->section});
    } else {
      const auto& mk = std::get<MarkOp>(op);
      if (batch_ids.count(mk.bullet_id)) {
        report.skipped_marks.push_back({mk.bullet_id, "same_batch_id"});
      } else if (pb.mark(mk.bullet_id, mk.helpful, at_step)) {
        ++report.applied_marks;
      } else {
        report.skipped_marks.push_back({mk.bullet_id, "unknown_id"});
      }
    }
  }
  return report;
}

}  // namespace

void validate_delta(const DeltaContext& delta) {
  if (delta.provenance.sample_id.empty())
    throw ValidationError("delta provenance sample_id is empty");
  for (size_t i = 0; i < delta.ops.size(); ++i) {
    if (const auto* add = std::get_if<AddOp>(&delta.ops[i])) {
      if (!content_nonempty(add->content))
        throw ValidationError("op " + std::to_string(i) + ": ADD content empty");
      if (add->section.empty())
        throw ValidationError("op " + std::to_string(i) + ": ADD section empty");
    } else {
      const auto& mk = std::get<MarkOp>(delta.ops[i]);
      if (!is_valid_bullet_id(mk.bullet_id))
        throw ValidationError("op " + std::to_string(i) +
                              ": MARK id malformed: " + mk.bullet_id);
    }
  }
}

std::pair<Playbook, MergeReport> merge(const Playbook& pb,
                                       const DeltaContext& delta) {
  Playbook next = pb;
  MergeReport report = apply_delta(next, delta);
  return {std::move(next), std::move(report)};
}

std::pair<Playbook, std::vector<MergeReport>> merge_batch(
    const Playbook& pb, const std::vector<DeltaContext>& deltas) {
  for (const auto& d : deltas) validate_delta(d);

  // Canonical order: provenance (sample_id, epoch, role_round), then the
  // serialized op list. Deltas that tie on every key are identical and
  // interchangeable, so the fold is independent of submission order.
  std::vector<size_t> order(deltas.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<std::string> wires(deltas.size());
  for (size_t i = 0; i < deltas.size(); ++i) wires[i] = delta_to_wire(deltas[i]);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& pa = deltas[a].provenance;
    const auto& pb_ = deltas[b].provenance;
    if (pa.sample_id != pb_.sample_id) return pa.sample_id < pb_.sample_id;
    if (pa.epoch != pb_.epoch) return pa.epoch < pb_.epoch;
    if (pa.role_round != pb_.role_round) return pa.role_round < pb_.role_round;
    return wires[a] < wires[b];
  });

  Playbook next = pb;
  std::vector<MergeReport> reports(deltas.size());
  for (size_t idx : order) {
    reports[idx] = apply_delta(next, deltas[idx]);
  }
  return {std::move(next), std::move(reports)};
}

std::string delta_to_wire(const DeltaContext& delta) {
  ordered_json doc;
  doc["ops"] = ordered_json::array();
  for (const auto& op : delta.ops) {
    if (const auto* add = std::get_if<AddOp>(&op)) {
      doc["ops"].push_back(
          {{"op", "ADD"}, {"section", add->section}, {"content", add->content}});
    } else {
      const auto& mk = std::get<MarkOp>(op);
      doc["ops"].push_back({{"op", "MARK"},
                            {"id", mk.bullet_id},
                            {"tag", mk.helpful ? "helpful" : "harmful"}});
    }
  }
  return doc.dump(2);
}

ParsedDelta parse_delta_ops(const std::string& text) {
  // Tolerate surrounding prose: parse the outermost {...} span.
  size_t b = text.find('{');
  size_t e = text.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b)
    throw ParseError("delta wire: no JSON object found");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.substr(b, e - b + 1));
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(std::string("delta wire: ") + err.what());
  }
  if (!doc.contains("ops") || !doc["ops"].is_array())
    throw ParseError("delta wire: missing ops array");

  ParsedDelta out;
  int i = -1;
  for (const auto& jop : doc["ops"]) {
    ++i;
    auto warn = [&](const std::string& why) {
      out.warnings.push_back("op " + std::to_string(i) + " dropped: " + why);
    };
    if (!jop.is_object() || !jop.contains("op") || !jop["op"].is_string()) {
      warn("not an op object");
      continue;
    }
    std::string kind = jop["op"].get<std::string>();
    if (kind == "ADD") {
      if (!jop.contains("section") || !jop.contains("content") ||
          !jop["section"].is_string() || !jop["content"].is_string()) {
        warn("ADD missing section/content");
        continue;
      }
      AddOp add{jop["section"].get<std::string>(),
                jop["content"].get<std::string>()};
      if (!content_nonempty(add.content)) {
        warn("ADD content empty");
        continue;
      }
      out.ops.push_back(add);
    } else if (kind == "MARK") {
      if (!jop.contains("id") || !jop.contains("tag") ||
          !jop["id"].is_string() || !jop["tag"].is_string()) {
        warn("MARK missing id/tag");
        continue;
      }
      std::string id = jop["id"].get<std::string>();
      std::string tag = jop["tag"].get<std::string>();
      if (!is_valid_bullet_id(id)) {
        warn("MARK id malformed: " + id);
        continue;
      }
      if (tag != "helpful" && tag != "harmful") {
        warn("MARK tag invalid: " + tag);
        continue;
      }
      out.ops.push_back(MarkOp{id, tag == "helpful"});
    } else {
      warn("unknown op kind: " + kind);
    }
  }
  return out;
}

}  // namespace ace
