#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ace/playbook.hpp"

namespace ace {

struct AddOp {
  std::string section;
  std::string content;  // non-empty
  bool operator==(const AddOp&) const = default;
};

struct MarkOp {
  std::string bullet_id;
  bool helpful = true;  // false = harmful
  bool operator==(const MarkOp&) const = default;
};

using DeltaOp = std::variant<AddOp, MarkOp>;

struct Provenance {
  std::string sample_id;  // non-empty
  int epoch = 0;
  int role_round = 0;
  bool operator==(const Provenance&) const = default;
};

/// A small set of merge operations produced for one sample.
struct DeltaContext {
  std::vector<DeltaOp> ops;
  Provenance provenance;
  bool operator==(const DeltaContext&) const = default;
};

struct SkippedMark {
  std::string bullet_id;
  std::string reason;  // "unknown_id" | "same_batch_id"
  bool operator==(const SkippedMark&) const = default;
};

struct RedirectedAdd {
  std::string bullet_id;      // id the ADD received
  std::string from_section;   // unknown section it asked for
  bool operator==(const RedirectedAdd&) const = default;
};

struct MergeReport {
  std::vector<std::string> added_ids;
  int applied_marks = 0;
  std::vector<SkippedMark> skipped_marks;
  std::vector<RedirectedAdd> redirected_adds;
  bool operator==(const MergeReport&) const = default;
};

/// Validates a delta structurally (non-empty ADD content, non-empty
/// provenance sample_id, syntactically valid MARK ids). Throws
/// ValidationError describing the first offending op.
void validate_delta(const DeltaContext& delta);

/// Deterministic non-LLM merge of one delta into a playbook snapshot.
///
/// Each ADD appends a fresh-id bullet at step+1; ADDs naming an unknown
/// section land in the catch-all "general" section and are recorded. Each
/// MARK bumps one counter of an existing bullet; MARKs on unknown ids are
/// skipped with reason "unknown_id". Bullets are never removed and content
/// is never altered. The step advances by exactly 1.
std::pair<Playbook, MergeReport> merge(const Playbook& pb,
                                       const DeltaContext& delta);

/// Merges a batch of deltas. The result is exactly the sequential fold of
/// merge() over the deltas in canonical order (provenance sample_id, epoch,
/// role_round, then serialized ops), so submission order never matters.
/// Within one delta, MARKs targeting ids created by that delta's own ADDs
/// are skipped with reason "same_batch_id". Reports are returned in
/// submission order.
std::pair<Playbook, std::vector<MergeReport>> merge_batch(
    const Playbook& pb, const std::vector<DeltaContext>& deltas);

/// Delta wire format: {"ops":[{"op":"ADD","section":...,"content":...} |
/// {"op":"MARK","id":...,"tag":"helpful"|"harmful"}]}.
std::string delta_to_wire(const DeltaContext& delta);

struct ParsedDelta {
  std::vector<DeltaOp> ops;
  std::vector<std::string> warnings;  // dropped ops, one line each
};

/// Parses the wire format leniently: structurally invalid ops are dropped
/// with a warning, valid ops are kept. Throws ParseError only when the
/// document itself is unreadable or has no "ops" array.
ParsedDelta parse_delta_ops(const std::string& text);

}  // namespace ace
