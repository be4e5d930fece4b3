#include "ace/adaptation.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "ace/errors.hpp"
#include "ace/roles.hpp"
#include "json.hpp"

namespace ace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json config_to_json(const AdaptationConfig& cfg) {
  return ordered_json{
      {"mode", cfg.mode == AdaptMode::kOffline ? "offline" : "online"},
      {"max_epochs", cfg.max_epochs},
      {"max_reflection_rounds", cfg.max_reflection_rounds},
      {"batch_size", cfg.batch_size},
      {"use_ground_truth", cfg.use_ground_truth},
      {"seed", cfg.seed},
      {"generator_temperature", cfg.generator_temperature},
      {"refine",
       {{"mode",
         cfg.refine_policy.mode == RefineMode::kProactive ? "proactive" : "lazy"},
        {"dedup_threshold", cfg.refine_policy.dedup_threshold},
        {"token_budget", cfg.refine_policy.token_budget}}}};
}

// Persists run artifacts as the loop goes, so an aborted run still leaves a
// usable partial log.
class RunWriter {
 public:
  explicit RunWriter(const std::string& dir) : dir_(dir) {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
  }

  bool enabled() const { return !dir_.empty(); }

  void write_config(const AdaptationConfig& cfg) {
    if (!enabled()) return;
    std::ofstream out(fs::path(dir_) / "config.json");
    out << config_to_json(cfg).dump(2) << "\n";
  }

  void write_step(const StepRecord& rec) {
    if (!enabled()) return;
    if (!steps_.is_open())
      steps_.open(fs::path(dir_) / "steps.jsonl", std::ios::trunc);
    steps_ << step_record_to_json(rec) << "\n";
    steps_.flush();
  }

  void checkpoint(int epoch, const Playbook& pb) {
    if (!enabled()) return;
    save(pb, (fs::path(dir_) / ("playbook_epoch_" + std::to_string(epoch) +
                                ".json")).string());
  }

  void finalize(const Playbook& pb, const Gateway& gateway) {
    if (!enabled()) return;
    save(pb, (fs::path(dir_) / "playbook_final.json").string());
    {
      std::ofstream out(fs::path(dir_) / "prompts.jsonl");
      for (const auto& req : gateway.request_log()) {
        out << ordered_json{{"seq", req.seq},
                            {"tag", req.tag},
                            {"prompt", req.prompt_text}}
                   .dump()
            << "\n";
      }
    }
    {
      ordered_json ledger = ordered_json::object();
      for (const auto& [tag, t] : gateway.ledger().totals()) {
        ledger[tag] = {{"calls", t.calls},
                       {"input_tokens", t.input_tokens},
                       {"output_tokens", t.output_tokens},
                       {"wall_ms", t.wall_ms},
                       {"errors", t.errors}};
      }
      std::ofstream out(fs::path(dir_) / "ledger.json");
      out << ledger.dump(2) << "\n";
    }
  }

 private:
  std::string dir_;
  std::ofstream steps_;
};

void check_components(const Components& comp) {
  if (!comp.gateway || !comp.embedder || !comp.counter || !comp.adapter)
    throw ConfigError("adaptation components incomplete");
}

Feedback make_feedback(const AdaptationConfig& cfg, const TaskAdapter& adapter,
                       const Sample& sample, const std::string& prediction) {
  if (cfg.use_ground_truth && sample.label)
    return GroundTruthFeedback{*sample.label};
  if (adapter.can_execute()) return adapter.execute(sample, prediction);
  return NoFeedback{};
}

struct SampleOutcome {
  DeltaContext delta;
  std::string prediction;
  std::optional<bool> correct;
  std::string error;
  long long wall_ms = 0;
};

// One sample through the Generator -> Reflector -> Curator pipeline.
SampleOutcome run_sample(const AdaptationConfig& cfg, Components& comp,
                         const Playbook& pb, const Sample& sample, int epoch) {
  auto start = std::chrono::steady_clock::now();
  SampleOutcome out;
  out.delta.provenance = {sample.id, epoch, 0};

  Trajectory traj =
      generate(*comp.gateway, comp.prompts, pb, sample.query,
               comp.adapter->preamble(), cfg.generator_temperature);
  out.prediction = traj.final_answer;
  if (sample.label)
    out.correct = comp.adapter->judge(traj.final_answer, *sample.label);

  try {
    Feedback fb = make_feedback(cfg, *comp.adapter, sample, traj.final_answer);
    Reflection refl = run_reflection(*comp.gateway, comp.prompts, traj, fb,
                                     cfg.max_reflection_rounds);
    CurateOutcome curated =
        curate(*comp.gateway, comp.prompts, refl, pb,
               Provenance{sample.id, epoch, refl.round});
    out.delta = std::move(curated.delta);
  } catch (const GatewayError&) {
    throw;  // hard failure aborts the run
  } catch (const std::exception& e) {
    out.error = e.what();
  }

  // Generator citations become counter marks so the signal is never lost.
  for (const auto& id : traj.cited_helpful)
    out.delta.ops.push_back(MarkOp{id, true});
  for (const auto& id : traj.cited_misleading)
    out.delta.ops.push_back(MarkOp{id, false});

  out.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

}  // namespace

std::vector<std::string> default_sections() {
  return {"strategies", "domain_concepts", "common_failures", "tool_use",
          "general"};
}

RunResult offline_adapt(const std::vector<Sample>& tasks,
                        const AdaptationConfig& cfg, Components& comp,
                        const std::string& run_dir) {
  if (cfg.mode != AdaptMode::kOffline)
    throw ConfigError("offline_adapt requires mode=offline");
  if (tasks.empty()) throw ConfigError("offline adaptation needs tasks");
  check_components(comp);

  RunWriter writer(run_dir);
  writer.write_config(cfg);

  RunResult result;
  result.playbook =
      new_playbook(default_sections(), cfg.refine_policy.token_budget);

  long long rollouts = 0;
  int step = 0;
  try {
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      // Deterministic per-epoch reshuffle.
      std::vector<size_t> order(tasks.size());
      std::iota(order.begin(), order.end(), size_t{0});
      std::mt19937 rng(cfg.seed + static_cast<unsigned>(epoch) * 7919u);
      std::shuffle(order.begin(), order.end(), rng);

      int epoch_adds = 0;
      int epoch_marks = 0;
      for (size_t pos = 0; pos < order.size();
           pos += static_cast<size_t>(cfg.batch_size)) {
        size_t end = std::min(order.size(),
                              pos + static_cast<size_t>(cfg.batch_size));
        std::vector<SampleOutcome> outcomes;
        std::vector<DeltaContext> deltas;
        for (size_t k = pos; k < end; ++k) {
          const Sample& sample = tasks[order[k]];
          SampleOutcome oc =
              run_sample(cfg, comp, result.playbook, sample, epoch);
          ++rollouts;
          deltas.push_back(oc.delta);
          outcomes.push_back(std::move(oc));
        }
        auto [merged, reports] = merge_batch(result.playbook, deltas);
        result.playbook = std::move(merged);
        auto [refined, refine_report] =
            maybe_refine(result.playbook, cfg.refine_policy, *comp.embedder,
                         comp.counter);
        result.playbook = std::move(refined);

        const int tokens = token_count(result.playbook, comp.counter);
        for (size_t k = 0; k < outcomes.size(); ++k) {
          StepRecord rec;
          rec.step = ++step;
          rec.epoch = epoch;
          rec.sample_id = deltas[k].provenance.sample_id;
          rec.predicted_answer = outcomes[k].prediction;
          rec.correct = outcomes[k].correct;
          rec.playbook_tokens = tokens;
          rec.rollouts_so_far = rollouts;
          rec.wall_ms = outcomes[k].wall_ms;
          rec.usage = comp.gateway->ledger().total();
          rec.added_bullets = static_cast<int>(reports[k].added_ids.size());
          rec.applied_marks = reports[k].applied_marks;
          rec.error = outcomes[k].error;
          if (k + 1 == outcomes.size()) rec.refine = refine_report;
          epoch_adds += rec.added_bullets;
          epoch_marks += rec.applied_marks;
          writer.write_step(rec);
          result.records.push_back(std::move(rec));
        }
      }
      writer.checkpoint(epoch, result.playbook);
      if (epoch_adds == 0 && epoch_marks == 0) break;  // quiescent epoch
    }
  } catch (...) {
    writer.finalize(result.playbook, *comp.gateway);
    throw;
  }
  writer.finalize(result.playbook, *comp.gateway);
  return result;
}

RunResult online_adapt(const std::vector<Sample>& stream,
                       const AdaptationConfig& cfg, Components& comp,
                       const std::optional<Playbook>& warmup,
                       const std::string& run_dir) {
  if (cfg.mode != AdaptMode::kOnline)
    throw ConfigError("online_adapt requires mode=online");
  check_components(comp);

  RunWriter writer(run_dir);
  writer.write_config(cfg);

  RunResult result;
  result.playbook =
      warmup ? *warmup
             : new_playbook(default_sections(), cfg.refine_policy.token_budget);

  long long rollouts = 0;
  int step = 0;
  try {
    for (const Sample& sample : stream) {
      // The prediction is made against the playbook as of the previous
      // step; the update below never feeds back into it.
      SampleOutcome oc = run_sample(cfg, comp, result.playbook, sample, 0);
      ++rollouts;
      result.predictions.push_back(oc.prediction);

      auto [merged, report] = merge(result.playbook, oc.delta);
      result.playbook = std::move(merged);
      auto [refined, refine_report] = maybe_refine(
          result.playbook, cfg.refine_policy, *comp.embedder, comp.counter);
      result.playbook = std::move(refined);

      StepRecord rec;
      rec.step = ++step;
      rec.epoch = 0;
      rec.sample_id = sample.id;
      rec.predicted_answer = oc.prediction;
      rec.correct = oc.correct;
      rec.playbook_tokens = token_count(result.playbook, comp.counter);
      rec.rollouts_so_far = rollouts;
      rec.wall_ms = oc.wall_ms;
      rec.usage = comp.gateway->ledger().total();
      rec.added_bullets = static_cast<int>(report.added_ids.size());
      rec.applied_marks = report.applied_marks;
      rec.error = oc.error;
      rec.refine = refine_report;
      writer.write_step(rec);
      result.records.push_back(std::move(rec));
    }
  } catch (...) {
    writer.finalize(result.playbook, *comp.gateway);
    throw;
  }
  writer.finalize(result.playbook, *comp.gateway);
  return result;
}

std::string step_record_to_json(const StepRecord& rec) {
  ordered_json j{{"step", rec.step},
                 {"epoch", rec.epoch},
                 {"sample_id", rec.sample_id},
                 {"predicted_answer", rec.predicted_answer},
                 {"playbook_tokens", rec.playbook_tokens},
                 {"rollouts_so_far", rec.rollouts_so_far},
                 {"wall_ms", rec.wall_ms},
                 {"added_bullets", rec.added_bullets},
                 {"applied_marks", rec.applied_marks}};
  if (rec.correct) j["correct"] = *rec.correct;
  if (!rec.error.empty()) j["error"] = rec.error;
  j["usage"] = {{"calls", rec.usage.calls},
                {"input_tokens", rec.usage.input_tokens},
                {"output_tokens", rec.usage.output_tokens},
                {"wall_ms", rec.usage.wall_ms},
                {"errors", rec.usage.errors}};
  if (rec.refine) {
    ordered_json pairs = ordered_json::array();
    for (const auto& p : rec.refine->merged_pairs)
      pairs.push_back({{"survivor_id", p.survivor_id},
                       {"absorbed_id", p.absorbed_id},
                       {"similarity", p.similarity}});
    j["refine"] = {{"merged_pairs", pairs},
                   {"pruned_ids", rec.refine->pruned_ids},
                   {"tokens_before", rec.refine->tokens_before},
                   {"tokens_after", rec.refine->tokens_after}};
  }
  return j.dump();
}

StepRecord step_record_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("step record: ") + e.what());
  }
  StepRecord rec;
  rec.step = j.at("step").get<int>();
  rec.epoch = j.value("epoch", 0);
  rec.sample_id = j.value("sample_id", "");
  rec.predicted_answer = j.value("predicted_answer", "");
  rec.playbook_tokens = j.at("playbook_tokens").get<int>();
  rec.rollouts_so_far = j.value("rollouts_so_far", 0LL);
  rec.wall_ms = j.value("wall_ms", 0LL);
  rec.added_bullets = j.value("added_bullets", 0);
  rec.applied_marks = j.value("applied_marks", 0);
  if (j.contains("correct")) rec.correct = j["correct"].get<bool>();
  if (j.contains("error")) rec.error = j["error"].get<std::string>();
  if (j.contains("usage")) {
    const auto& u = j["usage"];
    rec.usage.calls = u.value("calls", 0LL);
    rec.usage.input_tokens = u.value("input_tokens", 0LL);
    rec.usage.output_tokens = u.value("output_tokens", 0LL);
    rec.usage.wall_ms = u.value("wall_ms", 0LL);
    rec.usage.errors = u.value("errors", 0LL);
  }
  if (j.contains("refine")) {
    RefineReport rr;
    const auto& r = j["refine"];
    for (const auto& p : r.value("merged_pairs", nlohmann::json::array()))
      rr.merged_pairs.push_back({p.value("survivor_id", ""),
                                 p.value("absorbed_id", ""),
                                 p.value("similarity", 0.0)});
    rr.pruned_ids = r.value("pruned_ids", std::vector<std::string>{});
    rr.tokens_before = r.value("tokens_before", 0);
    rr.tokens_after = r.value("tokens_after", 0);
    rec.refine = std::move(rr);
  }
  return rec;
}

}  // namespace ace
