#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ace/adaptation.hpp"
#include "ace/task.hpp"

namespace ace {

struct EvalSampleResult {
  std::string sample_id;
  std::string prediction;
  bool correct = false;
  bool gateway_error = false;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<EvalSampleResult> per_sample;
};

/// Evaluates a frozen playbook over labeled tasks with exact-match judging.
/// Gateway errors count as incorrect and are flagged. Throws ConfigError on
/// an empty task list (accuracy would be undefined).
EvalResult run_eval(const Playbook& pb, const TaskAdapter& adapter,
                    Gateway& gateway, const PromptLibrary& prompts,
                    double temperature = 0.0);

struct CollapseEvent {
  int step = 0;
  int tokens_before = 0;
  int tokens_after = 0;
  double drop_ratio = 0.0;  // 1 - after/before
};

/// Flags abrupt context shrinkage: one event per adjacent step pair whose
/// playbook token count drops by at least `threshold` as a fraction. Steps
/// whose refine report pruned bullets are legitimate shrinkage and are
/// skipped when whitelist_pruning is set.
std::vector<CollapseEvent> detect_collapse(
    const std::vector<StepRecord>& records, double threshold = 0.5,
    bool whitelist_pruning = true);

struct RunSummary {
  std::optional<double> accuracy;  // absent when no labels were judged
  long long rollouts = 0;
  double adaptation_latency_s = 0.0;
  double token_cost = 0.0;
  std::map<std::string, TagTotals> usage_by_tag;
};

/// Builds the summary for a completed run directory: rollouts from the
/// generator tag, latency from the step log, cost from the persisted ledger
/// and price table. Throws MissingArtifactsError when the step log or
/// ledger is absent.
RunSummary report(const std::string& run_dir, const PriceTable& prices);

std::string summary_to_json(const RunSummary& s);
std::string summary_to_text(const RunSummary& s);

/// Reads a persisted step log (steps.jsonl).
std::vector<StepRecord> load_step_log(const std::string& run_dir);

// -- Built-in desk-scale task adapters --------------------------------------

/// Key -> value fact lookup. Queries ask for a key's value; a query is only
/// answerable once the fact has been curated into the playbook. The
/// execution verifier checks answer shape and membership in the value
/// universe without consulting the label.
class LookupQaTask : public TaskAdapter {
 public:
  /// n_facts facts "key-i" -> "val-<hex>"; the online stream queries the
  /// first half of the table twice (one full pass, then a repeat pass) so
  /// curated knowledge is observable in the second half.
  explicit LookupQaTask(int n_facts, unsigned seed = 7);

  std::vector<Sample> samples() const override;
  std::string preamble() const override;
  bool can_execute() const override { return true; }
  ExecutionFeedback execute(const Sample& sample,
                            const std::string& prediction) const override;

  const std::map<std::string, std::string>& facts() const { return facts_; }

 private:
  std::map<std::string, std::string> facts_;
  std::vector<Sample> stream_;
};

/// Arithmetic environment: the query names a two-operand expression and the
/// answer must be the bare integer result. execute() evaluates the
/// expression and reports success or a format/mismatch failure; the log
/// never contains the numeric result.
class ArithEnvTask : public TaskAdapter {
 public:
  explicit ArithEnvTask(int n_samples, unsigned seed = 11);

  std::vector<Sample> samples() const override;
  std::string preamble() const override;
  bool can_execute() const override { return true; }
  ExecutionFeedback execute(const Sample& sample,
                            const std::string& prediction) const override;

  /// Evaluates the expression embedded in a query string.
  static long long eval_query(const std::string& query);

 private:
  std::vector<Sample> samples_;
};

}  // namespace ace
