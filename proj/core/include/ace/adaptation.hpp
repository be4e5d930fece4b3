#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ace/embeddings.hpp"
#include "ace/gateway.hpp"
#include "ace/playbook.hpp"
#include "ace/prompts.hpp"
#include "ace/refine.hpp"
#include "ace/task.hpp"

namespace ace {

enum class AdaptMode { kOffline, kOnline };

struct AdaptationConfig {
  AdaptMode mode = AdaptMode::kOffline;
  int max_epochs = 5;
  int max_reflection_rounds = 5;
  int batch_size = 1;
  RefinePolicy refine_policy;
  bool use_ground_truth = true;
  unsigned seed = 0;
  double generator_temperature = 0.0;
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  std::string sample_id;
  std::string predicted_answer;
  std::optional<bool> correct;
  int playbook_tokens = 0;       // after this step's merge/refine
  long long rollouts_so_far = 0; // generator calls, cumulative
  long long wall_ms = 0;
  TagTotals usage;               // cumulative all-tag usage snapshot
  std::optional<RefineReport> refine;
  int added_bullets = 0;
  int applied_marks = 0;
  std::string error;  // non-empty when the sample's pipeline degraded
};

/// Everything the adaptation loops need, owned by the caller.
struct Components {
  Gateway* gateway = nullptr;
  Embedder* embedder = nullptr;
  TokenCounter counter;
  PromptLibrary prompts;
  const TaskAdapter* adapter = nullptr;
};

struct RunResult {
  Playbook playbook;
  std::vector<StepRecord> records;
  std::vector<std::string> predictions;  // online mode only, stream order
};

/// Multi-epoch offline adaptation over a finite task list. Per epoch the
/// tasks are reshuffled deterministically from cfg.seed; per sample the loop
/// runs generate -> feedback -> reflection rounds -> curate, merges deltas
/// at batch boundaries, then refines per policy. Stops early when a whole
/// epoch produced no ADDs and no applied MARKs. When run_dir is non-empty
/// the config snapshot, per-epoch checkpoints, step log and prompt log are
/// persisted there.
RunResult offline_adapt(const std::vector<Sample>& tasks,
                        const AdaptationConfig& cfg, Components& comp,
                        const std::string& run_dir = "");

/// Online predict-then-update over a stream: the prediction for sample t is
/// made with the playbook as of step t-1, strictly before any update derived
/// from sample t. Starts from `warmup` when given, else an empty playbook.
RunResult online_adapt(const std::vector<Sample>& stream,
                       const AdaptationConfig& cfg, Components& comp,
                       const std::optional<Playbook>& warmup = std::nullopt,
                       const std::string& run_dir = "");

/// Default sections for new playbooks.
std::vector<std::string> default_sections();

/// Step log line (JSON) for one record, and its inverse.
std::string step_record_to_json(const StepRecord& rec);
StepRecord step_record_from_json(const std::string& line);

}  // namespace ace
