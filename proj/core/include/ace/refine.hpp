#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ace/embeddings.hpp"
#include "ace/playbook.hpp"
#include "ace/tokens.hpp"

namespace ace {

enum class RefineMode { kProactive, kLazy };

struct RefinePolicy {
  RefineMode mode = RefineMode::kProactive;
  double dedup_threshold = 0.90;  // cosine, in (0,1]
  int token_budget = 8000;
};

struct MergedPair {
  std::string survivor_id;
  std::string absorbed_id;
  double similarity = 0.0;  // >= threshold by construction
  bool operator==(const MergedPair&) const = default;
};

struct RefineReport {
  std::vector<MergedPair> merged_pairs;
  std::vector<std::string> pruned_ids;
  int tokens_before = 0;
  int tokens_after = 0;
  bool operator==(const RefineReport&) const = default;
};

/// Semantic de-duplication within each section. Pairs at cosine >= threshold
/// are clustered transitively; each cluster keeps one survivor (highest
/// helpful count, then smaller id) which absorbs the others' counters.
/// Stable under re-application. On any embedding failure the playbook is
/// returned unchanged and the error propagates.
std::pair<Playbook, RefineReport> dedup(const Playbook& pb, Embedder& embedder,
                                        double threshold);

/// Removes lowest-priority bullets until the rendered token count fits the
/// playbook's budget. Priority ascends by (helpful - harmful), then helpful,
/// then last_touched_step, then id (larger ids pruned last). Never removes
/// the final remaining bullet, even if it alone exceeds the budget.
/// budget_override, when set, takes precedence over pb.token_budget().
std::pair<Playbook, RefineReport> prune_to_budget(
    const Playbook& pb, const TokenCounter& counter,
    std::optional<int> budget_override = std::nullopt);

/// Applies the grow-and-refine policy: proactive mode always runs dedup then
/// prune; lazy mode runs them only once the rendered playbook exceeds the
/// policy budget. Returns nullopt when the trigger did not fire.
std::pair<Playbook, std::optional<RefineReport>> maybe_refine(
    const Playbook& pb, const RefinePolicy& policy, Embedder& embedder,
    const TokenCounter& counter);

}  // namespace ace
