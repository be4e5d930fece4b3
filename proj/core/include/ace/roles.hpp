#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ace/delta.hpp"
#include "ace/gateway.hpp"
#include "ace/playbook.hpp"
#include "ace/prompts.hpp"

namespace ace {

struct TrajectoryStep {
  std::string thought;
  std::string action;
  std::string observation;
};

/// Generator output for one query: the reasoning trace, the final answer,
/// and which playbook bullets the Generator cited as useful or misleading.
struct Trajectory {
  std::string query;
  std::vector<TrajectoryStep> steps;
  std::string final_answer;  // possibly empty on failure
  std::vector<std::string> cited_helpful;
  std::vector<std::string> cited_misleading;
  std::string raw;  // full model output
};

struct GroundTruthFeedback {
  std::string expected;
};
struct ExecutionFeedback {
  bool success = false;
  std::string log;
};
struct NoFeedback {};
using Feedback = std::variant<GroundTruthFeedback, ExecutionFeedback, NoFeedback>;

enum class InsightKind { kStrategy, kPitfall, kDomainFact, kCorrection };

std::string insight_kind_name(InsightKind k);
std::optional<InsightKind> parse_insight_kind(const std::string& s);

struct Insight {
  InsightKind kind = InsightKind::kStrategy;
  std::string text;            // non-empty
  std::string target_section;  // section tag
  bool operator==(const Insight&) const = default;
};

struct ProposedMark {
  std::string bullet_id;
  bool helpful = true;
  bool operator==(const ProposedMark&) const = default;
};

/// Lessons the Reflector distilled from one trajectory plus feedback.
struct Reflection {
  std::vector<Insight> insights;
  std::vector<ProposedMark> proposed_marks;
  int round = 1;
  bool operator==(const Reflection&) const = default;
};

struct ReflectOutcome {
  Reflection reflection;
  bool done = false;  // model emitted the DONE marker
};

struct CurateOutcome {
  DeltaContext delta;
  std::vector<std::string> warnings;
};

/// Runs the Generator: renders the playbook into the prompt, asks for a
/// FINAL: answer plus optional USED:/MISLED: citation lines, and parses the
/// result. Unparseable citations degrade to empty lists, never an error.
Trajectory generate(Gateway& gateway, const PromptLibrary& prompts,
                    const Playbook& pb, const std::string& query,
                    const std::string& task_preamble,
                    double temperature = 0.0);

/// One Reflector round. The prompt carries the trajectory, the feedback
/// (expected answer for GroundTruth, success flag and log for Execution,
/// nothing for NoFeedback) and the prior reflection when round > 1. A parse
/// failure triggers one reprompt with a format reminder; a second failure
/// yields an empty Reflection so adaptation can continue.
ReflectOutcome reflect(Gateway& gateway, const PromptLibrary& prompts,
                       const Trajectory& traj, const Feedback& fb,
                       const std::optional<Reflection>& prior, int round);

/// Iterates reflect() up to max_rounds, stopping early on the DONE marker
/// or when a round reproduces the prior round's insights exactly.
Reflection run_reflection(Gateway& gateway, const PromptLibrary& prompts,
                          const Trajectory& traj, const Feedback& fb,
                          int max_rounds);

/// First-80-characters digest of each bullet, given to the Curator so it
/// can MARK existing knowledge instead of re-ADDing it.
std::string playbook_digest(const Playbook& pb);

/// Runs the Curator over a Reflection. The Curator sees only the insights
/// and the playbook digest, never the raw trajectory. Its output is parsed
/// against the delta wire format; invalid ops are dropped with warnings.
/// The Reflection's proposed_marks are appended as MARK ops afterwards so
/// the counter signal survives a forgetful Curator. Parse failure policy
/// matches reflect(): one reprompt, then degrade to marks-only.
CurateOutcome curate(Gateway& gateway, const PromptLibrary& prompts,
                     const Reflection& refl, const Playbook& pb,
                     const Provenance& provenance);

}  // namespace ace
