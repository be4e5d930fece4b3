#include "ace/roles.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "ace/errors.hpp"
#include "json.hpp"

namespace ace {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> parse_citation_line(const std::string& rest) {
  std::vector<std::string> ids;
  static const std::regex id_re(R"(pb-\d+)");
  for (auto it = std::sregex_iterator(rest.begin(), rest.end(), id_re);
       it != std::sregex_iterator(); ++it) {
    std::string id = it->str();
    if (is_valid_bullet_id(id) &&
        std::find(ids.begin(), ids.end(), id) == ids.end())
      ids.push_back(id);
  }
  return ids;
}

// Extracts the outermost {...} span from model output and parses it.
nlohmann::json extract_json(const std::string& text) {
  size_t b = text.find('{');
  size_t e = text.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b)
    throw ParseError("no JSON object in model output");
  return nlohmann::json::parse(text.substr(b, e - b + 1));
}

std::string feedback_block(const Feedback& fb) {
  if (const auto* gt = std::get_if<GroundTruthFeedback>(&fb))
    return "Expected answer: " + gt->expected + "\n";
  if (const auto* ex = std::get_if<ExecutionFeedback>(&fb)) {
    std::string s = "Execution success: ";
    s += ex->success ? "true" : "false";
    s += "\nExecution log: " + ex->log + "\n";
    return s;
  }
  return "";
}

std::string trajectory_block(const Trajectory& traj) {
  std::ostringstream out;
  out << "Query: " << traj.query << "\n";
  for (const auto& step : traj.steps) {
    if (!step.thought.empty()) out << "Thought: " << step.thought << "\n";
    if (!step.action.empty()) out << "Action: " << step.action << "\n";
    if (!step.observation.empty())
      out << "Observation: " << step.observation << "\n";
  }
  out << "Model output:\n" << traj.raw << "\n";
  out << "Final answer: " << traj.final_answer << "\n";
  return out.str();
}

std::string insights_block(const Reflection& refl) {
  std::ostringstream out;
  for (const auto& ins : refl.insights) {
    out << "- [" << insight_kind_name(ins.kind) << " -> " << ins.target_section
        << "] " << ins.text << "\n";
  }
  if (refl.insights.empty()) out << "(none)\n";
  return out.str();
}

std::string default_section_for(InsightKind kind) {
  switch (kind) {
    case InsightKind::kStrategy:
      return "strategies";
    case InsightKind::kPitfall:
      return "common_failures";
    case InsightKind::kDomainFact:
      return "domain_concepts";
    case InsightKind::kCorrection:
      return "general";
  }
  return "general";
}

Reflection parse_reflection(const std::string& content, int round,
                            bool* done) {
  nlohmann::json doc = extract_json(content);
  Reflection refl;
  refl.round = round;
  if (done) *done = doc.value("done", false);
  if (doc.contains("insights")) {
    if (!doc["insights"].is_array())
      throw ParseError("reflection insights is not an array");
    for (const auto& j : doc["insights"]) {
      Insight ins;
      auto kind = parse_insight_kind(j.value("kind", "strategy"));
      ins.kind = kind.value_or(InsightKind::kStrategy);
      ins.text = trim(j.value("text", ""));
      if (ins.text.empty()) continue;
      ins.target_section = j.value("section", "");
      if (ins.target_section.empty())
        ins.target_section = default_section_for(ins.kind);
      refl.insights.push_back(std::move(ins));
    }
  }
  if (doc.contains("marks")) {
    for (const auto& j : doc["marks"]) {
      std::string id = j.value("id", "");
      std::string tag = j.value("tag", "");
      if (!is_valid_bullet_id(id)) continue;
      if (tag != "helpful" && tag != "harmful") continue;
      refl.proposed_marks.push_back({id, tag == "helpful"});
    }
  }
  return refl;
}

}  // namespace

std::string insight_kind_name(InsightKind k) {
  switch (k) {
    case InsightKind::kStrategy:
      return "strategy";
    case InsightKind::kPitfall:
      return "pitfall";
    case InsightKind::kDomainFact:
      return "domain_fact";
    case InsightKind::kCorrection:
      return "correction";
  }
  return "strategy";
}

std::optional<InsightKind> parse_insight_kind(const std::string& s) {
  if (s == "strategy") return InsightKind::kStrategy;
  if (s == "pitfall") return InsightKind::kPitfall;
  if (s == "domain_fact") return InsightKind::kDomainFact;
  if (s == "correction") return InsightKind::kCorrection;
  return std::nullopt;
}

Trajectory generate(Gateway& gateway, const PromptLibrary& prompts,
                    const Playbook& pb, const std::string& query,
                    const std::string& task_preamble, double temperature) {
  ChatRequest req;
  req.tag = "generator";
  req.temperature = temperature;
  req.messages.push_back(
      {"system", prompts.expand("generator_system", {{"preamble", task_preamble}})});
  req.messages.push_back(
      {"user", prompts.expand("generator_user",
                              {{"playbook", render(pb)}, {"query", query}})});
  ChatResponse resp = gateway.complete(req);

  Trajectory traj;
  traj.query = query;
  traj.raw = resp.content;

  std::istringstream lines(resp.content);
  std::string line;
  while (std::getline(lines, line)) {
    std::string t = trim(line);
    if (t.rfind("FINAL:", 0) == 0) {
      traj.final_answer = trim(t.substr(6));
    } else if (t.rfind("USED:", 0) == 0) {
      traj.cited_helpful = parse_citation_line(t.substr(5));
    } else if (t.rfind("MISLED:", 0) == 0) {
      traj.cited_misleading = parse_citation_line(t.substr(7));
    }
  }
  return traj;
}

ReflectOutcome reflect(Gateway& gateway, const PromptLibrary& prompts,
                       const Trajectory& traj, const Feedback& fb,
                       const std::optional<Reflection>& prior, int round) {
  if (round < 1) throw ValidationError("reflection round must be >= 1");

  std::string prior_block;
  if (round > 1 && prior) {
    prior_block = "Prior reflection (round " + std::to_string(prior->round) +
                  "):\n" + insights_block(*prior) +
                  "Refine or confirm these lessons.\n";
  }
  ChatRequest req;
  req.tag = "reflector";
  req.temperature = 0.0;
  req.messages.push_back({"system", prompts.get("reflector_system")});
  req.messages.push_back(
      {"user", prompts.expand("reflector_user",
                              {{"trajectory", trajectory_block(traj)},
                               {"feedback", feedback_block(fb)},
                               {"prior", prior_block}})});

  ChatResponse resp = gateway.complete(req);
  ReflectOutcome out;
  try {
    out.reflection = parse_reflection(resp.content, round, &out.done);
    return out;
  } catch (const std::exception&) {
    // One reprompt with a format reminder, then degrade to empty.
  }
  ChatRequest retry = req;
  retry.messages.push_back({"assistant", resp.content});
  retry.messages.push_back(
      {"user",
       "Your previous reply was not valid JSON. Respond with only the JSON "
       "object in the required schema."});
  ChatResponse resp2 = gateway.complete(retry);
  try {
    out.reflection = parse_reflection(resp2.content, round, &out.done);
  } catch (const std::exception&) {
    out.reflection = Reflection{};
    out.reflection.round = round;
    out.done = true;
  }
  return out;
}

Reflection run_reflection(Gateway& gateway, const PromptLibrary& prompts,
                          const Trajectory& traj, const Feedback& fb,
                          int max_rounds) {
  std::optional<Reflection> prior;
  for (int round = 1; round <= max_rounds; ++round) {
    ReflectOutcome out = reflect(gateway, prompts, traj, fb, prior, round);
    bool fixed_point = prior && out.reflection.insights == prior->insights;
    prior = std::move(out.reflection);
    if (out.done || fixed_point) break;
  }
  return *prior;
}

std::string playbook_digest(const Playbook& pb) {
  std::ostringstream out;
  for (const auto& b : pb.bullets()) {
    out << b.id << ": " << b.content.substr(0, 80) << "\n";
  }
  if (pb.bullets().empty()) out << "(no bullets yet)\n";
  return out.str();
}

CurateOutcome curate(Gateway& gateway, const PromptLibrary& prompts,
                     const Reflection& refl, const Playbook& pb,
                     const Provenance& provenance) {
  CurateOutcome out;
  out.delta.provenance = provenance;

  auto append_marks = [&] {
    for (const auto& m : refl.proposed_marks)
      out.delta.ops.push_back(MarkOp{m.bullet_id, m.helpful});
  };

  if (refl.insights.empty() && refl.proposed_marks.empty()) return out;
  if (refl.insights.empty()) {
    // Nothing to curate; keep the counter signal without an LLM round trip.
    append_marks();
    return out;
  }

  ChatRequest req;
  req.tag = "curator";
  req.temperature = 0.0;
  req.messages.push_back({"system", prompts.get("curator_system")});
  req.messages.push_back(
      {"user", prompts.expand("curator_user",
                              {{"insights", insights_block(refl)},
                               {"digest", playbook_digest(pb)}})});

  ChatResponse resp = gateway.complete(req);
  try {
    ParsedDelta parsed = parse_delta_ops(resp.content);
    out.delta.ops = std::move(parsed.ops);
    out.warnings = std::move(parsed.warnings);
    append_marks();
    return out;
  } catch (const std::exception&) {
  }
  ChatRequest retry = req;
  retry.messages.push_back({"assistant", resp.content});
  retry.messages.push_back(
      {"user",
       "Your previous reply was not a valid op list. Respond with only the "
       "JSON object {\"ops\":[...]} in the required schema."});
  ChatResponse resp2 = gateway.complete(retry);
  try {
    ParsedDelta parsed = parse_delta_ops(resp2.content);
    out.delta.ops = std::move(parsed.ops);
    out.warnings = std::move(parsed.warnings);
  } catch (const std::exception& e) {
    out.warnings.push_back(std::string("curator output unusable: ") + e.what());
  }
  append_marks();
  return out;
}

}  // namespace ace
