// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "ace/adaptation.hpp"
#include "ace/delta.hpp"
#include "ace/errors.hpp"
#include "ace/harness.hpp"
#include "ace/refine.hpp"
#include "json.hpp"
#include "support/sim_roles.hpp"

using namespace ace;
using namespace ace::testsupport;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!ok && !detail.empty()) std::cout << "  (" << detail << ")";
  std::cout << "\n";
  if (!ok) ++g_failures;
}

template <typename Fn>
void run_criterion(const std::string& name, Fn fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    criterion(name, false, std::string("exception: ") + e.what());
  }
}

// ---- random case generation ------------------------------------------------

Playbook random_playbook(std::mt19937& rng, int max_bullets = 6) {
  Playbook pb = new_playbook({"strategies", "general"}, 100000);
  int n = static_cast<int>(rng() % (max_bullets + 1));
  for (int i = 0; i < n; ++i) {
    pb.advance_step(1);
    const auto& b =
        pb.append_bullet(rng() % 2 == 0 ? "strategies" : "general",
                         "seed bullet " + std::to_string(rng() % 1000), pb.step());
    int marks = static_cast<int>(rng() % 4);
    for (int m = 0; m < marks; ++m) pb.mark(b.id, rng() % 2 == 0, pb.step());
  }
  return pb;
}

DeltaContext random_delta(std::mt19937& rng, bool marks_only) {
  DeltaContext delta;
  delta.provenance = {"s" + std::to_string(rng() % 5),
                      static_cast<int>(rng() % 3),
                      static_cast<int>(rng() % 2)};
  int ops = static_cast<int>(rng() % 5);
  for (int i = 0; i < ops; ++i) {
    if (!marks_only && rng() % 2 == 0)
      delta.ops.push_back(
          AddOp{"general", "added " + std::to_string(rng() % 100)});
    else
      delta.ops.push_back(MarkOp{format_bullet_id(1 + static_cast<int>(rng() % 8)),
                                 rng() % 2 == 0});
  }
  return delta;
}

// Canonical-order oracle: sort by provenance with the serialized wire as
// the tiebreak (the definition of canonical order), then fold single merges.
Playbook sequential_fold_oracle(const Playbook& pb,
                                std::vector<DeltaContext> deltas) {
  std::stable_sort(deltas.begin(), deltas.end(),
                   [](const DeltaContext& a, const DeltaContext& b) {
                     auto ka = std::tuple(a.provenance.sample_id,
                                          a.provenance.epoch,
                                          a.provenance.role_round,
                                          delta_to_wire(a));
                     auto kb = std::tuple(b.provenance.sample_id,
                                          b.provenance.epoch,
                                          b.provenance.role_round,
                                          delta_to_wire(b));
                     return ka < kb;
                   });
  Playbook acc = pb;
  for (const auto& d : deltas) acc = merge(acc, d).first;
  return acc;
}

// ---- shared run helpers ----------------------------------------------------

struct SimRun {
  std::shared_ptr<CallbackBackend> backend;
  std::shared_ptr<Gateway> gateway;
  std::shared_ptr<CachingEmbedder> embedder;
  Components comp;
};

SimRun make_sim_run(std::shared_ptr<CallbackBackend> backend,
                    const TaskAdapter& adapter) {
  SimRun run;
  run.backend = std::move(backend);
  run.gateway = std::make_shared<Gateway>(run.backend);
  run.embedder = std::make_shared<CachingEmbedder>(
      std::make_shared<HashingEmbedder>());
  run.comp.gateway = run.gateway.get();
  run.comp.embedder = run.embedder.get();
  run.comp.counter = default_token_counter();
  run.comp.prompts = PromptLibrary::defaults();
  run.comp.adapter = &adapter;
  return run;
}

AdaptationConfig online_config() {
  AdaptationConfig cfg;
  cfg.mode = AdaptMode::kOnline;
  cfg.refine_policy.mode = RefineMode::kLazy;
  cfg.refine_policy.token_budget = 100000;
  return cfg;
}

double accuracy_over(const std::vector<StepRecord>& records, size_t begin,
                     size_t end) {
  int correct = 0;
  for (size_t i = begin; i < end; ++i)
    if (records[i].correct.value_or(false)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(end - begin);
}

// Step log line with volatile timing fields zeroed; everything else must be
// bit-identical across reruns.
std::string normalized_step_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  j["wall_ms"] = 0;
  if (j.contains("usage")) j["usage"]["wall_ms"] = 0;
  return j.dump();
}

std::vector<std::string> normalized_step_log(const fs::path& run_dir) {
  std::ifstream in(run_dir / "steps.jsonl");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(normalized_step_line(line));
  return lines;
}

// ---- criteria --------------------------------------------------------------

void merge_algebra_suite() {
  auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(4242);
  bool equal_ok = true, no_shrink_ok = true, monotone_ok = true;
  for (int iter = 0; iter < 1000; ++iter) {
    Playbook pb = random_playbook(rng);
    std::vector<DeltaContext> deltas;
    int n = static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) deltas.push_back(random_delta(rng, false));

    auto [batched, reports] = merge_batch(pb, deltas);
    Playbook oracle = sequential_fold_oracle(pb, deltas);
    if (!(batched == oracle)) equal_ok = false;

    if (batched.bullets().size() < pb.bullets().size()) no_shrink_ok = false;
    for (const auto& b : pb.bullets()) {
      const Bullet* after = batched.find(b.id);
      if (!after || after->content != b.content ||
          after->helpful < b.helpful || after->harmful < b.harmful)
        monotone_ok = false;
    }
  }
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  criterion("merge-algebra: batch equals canonical sequential fold (1000 cases)",
            equal_ok);
  criterion("merge-algebra: no-shrink holds on every case", no_shrink_ok);
  criterion("merge-algebra: counter monotonicity holds on every case",
            monotone_ok);
  criterion("merge-algebra: runtime < 30 s", secs < 30.0,
            std::to_string(secs) + " s");
}

void mark_permutation_property() {
  std::mt19937 rng(777);
  bool ok = true;
  for (int c = 0; c < 20 && ok; ++c) {
    Playbook pb = random_playbook(rng);
    std::vector<DeltaContext> deltas;
    int n = 2 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) deltas.push_back(random_delta(rng, true));
    Playbook reference = merge_batch(pb, deltas).first;
    for (int p = 0; p < 100; ++p) {
      std::shuffle(deltas.begin(), deltas.end(), rng);
      if (!(merge_batch(pb, deltas).first == reference)) {
        ok = false;
        break;
      }
    }
  }
  criterion("mark-permutation: all permutations of MARK-only batches agree "
            "(20 cases x 100 permutations)",
            ok);
}

void refine_suite() {
  HashingEmbedder embedder;
  TokenCounter counter = default_token_counter();
  std::mt19937 rng(31);
  const char* phrases[] = {"alpha beta gamma", "alpha beta gamma",
                           "delta routing path", "unrelated topic entirely",
                           "check the api return codes"};

  bool idempotent = true, conserved = true;
  for (int iter = 0; iter < 100; ++iter) {
    Playbook pb = new_playbook({"strategies", "general"}, 100000);
    int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      pb.advance_step(1);
      const auto& b = pb.append_bullet(rng() % 2 == 0 ? "strategies" : "general",
                                       phrases[rng() % 5], pb.step());
      for (int m = 0; m < static_cast<int>(rng() % 4); ++m)
        pb.mark(b.id, rng() % 2 == 0, pb.step());
    }
    auto sum = [](const Playbook& p) {
      int h = 0, k = 0;
      for (const auto& b : p.bullets()) {
        h += b.helpful;
        k += b.harmful;
      }
      return std::pair(h, k);
    };
    auto [once, r1] = dedup(pb, embedder, 0.90);
    if (sum(once) != sum(pb)) conserved = false;
    auto [twice, r2] = dedup(once, embedder, 0.90);
    if (!(twice == once) || !r2.merged_pairs.empty()) idempotent = false;
  }
  criterion("refine: dedup idempotence (exact equality on re-application)",
            idempotent);
  criterion("refine: counter conservation under dedup", conserved);

  // Prune priority vs an independent sorted-order oracle on <= 6 bullets.
  bool prune_ok = true;
  for (int iter = 0; iter < 200 && prune_ok; ++iter) {
    Playbook pb = new_playbook({"strategies", "general"},
                               10 + static_cast<int>(rng() % 120));
    int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      pb.advance_step(1);
      const auto& b = pb.append_bullet("strategies",
                                       "bullet number " + std::to_string(i),
                                       pb.step());
      for (int m = 0; m < static_cast<int>(rng() % 3); ++m)
        pb.mark(b.id, rng() % 2 == 0, pb.step());
    }
    // oracle: full ascending-priority sort, drop the prefix until it fits
    std::vector<Bullet> sorted = pb.bullets();
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Bullet& a, const Bullet& b) {
                       return std::tuple(a.helpful - a.harmful, a.helpful,
                                         a.last_touched_step,
                                         bullet_id_number(a.id)) <
                              std::tuple(b.helpful - b.harmful, b.helpful,
                                         b.last_touched_step,
                                         bullet_id_number(b.id));
                     });
    std::set<std::string> expect_removed;
    {
      std::vector<Bullet> kept = pb.bullets();
      for (const auto& victim : sorted) {
        if (kept.size() == 1) break;
        Playbook probe = pb;
        probe.replace_bullets(kept);
        if (token_count(probe, counter) <= pb.token_budget()) break;
        std::erase_if(kept, [&](const Bullet& b) { return b.id == victim.id; });
        expect_removed.insert(victim.id);
      }
    }
    auto [pruned, report] = prune_to_budget(pb, counter);
    std::set<std::string> got(report.pruned_ids.begin(),
                              report.pruned_ids.end());
    if (got != expect_removed) prune_ok = false;
  }
  criterion("refine: prune priority matches brute-force oracle (<= 6 bullets)",
            prune_ok);
}

void collapse_criteria() {
  // Reference trace: the big context at step 60 collapses at step 61.
  std::vector<StepRecord> trace;
  for (int s = 1; s <= 60; ++s) {
    StepRecord r;
    r.step = s;
    r.playbook_tokens = 300 * s;  // ends at exactly 18000 before the spike
    trace.push_back(r);
  }
  trace[59].playbook_tokens = 18282;
  StepRecord drop;
  drop.step = 61;
  drop.playbook_tokens = 122;
  trace.push_back(drop);

  auto events = detect_collapse(trace, 0.5);
  bool fixture_ok = events.size() == 1 && events[0].step == 61 &&
                    std::abs(events[0].drop_ratio - 0.99333) < 1e-4;
  criterion("collapse: reference trace yields one event at step 61 "
            "(drop_ratio ~ 0.99333)",
            fixture_ok);

  // 100-step online loop on lookup-qa with a tight budget so pruning fires.
  LookupQaTask task(100);
  SimRun run = make_sim_run(make_lookup_sim_backend(), task);
  AdaptationConfig cfg = online_config();
  cfg.refine_policy.mode = RefineMode::kLazy;
  cfg.refine_policy.token_budget = 600;
  RunResult result = online_adapt(task.samples(), cfg, run.comp);
  bool hundred = result.records.size() == 100;
  auto loop_events = detect_collapse(result.records, 0.5);
  criterion("collapse: 100-step lookup-qa loop has zero events outside "
            "whitelisted pruning steps",
            hundred && loop_events.empty(),
            std::to_string(loop_events.size()) + " events, " +
                std::to_string(result.records.size()) + " steps");
}

void end_to_end_scripted() {
  auto start = std::chrono::steady_clock::now();
  fs::path dir_a = fs::temp_directory_path() / "ace_accept_run_a";
  fs::path dir_b = fs::temp_directory_path() / "ace_accept_run_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  LookupQaTask task(20);
  auto do_run = [&](const fs::path& dir) {
    SimRun run = make_sim_run(make_lookup_sim_backend(), task);
    return online_adapt(task.samples(), online_config(), run.comp, std::nullopt,
                        dir.string());
  };
  RunResult a = do_run(dir_a);
  RunResult b = do_run(dir_b);

  size_t n = a.records.size();
  bool improved = n == 20 && accuracy_over(a.records, 10, 20) >
                                 accuracy_over(a.records, 0, 10);
  criterion("e2e: accuracy over samples 11-20 strictly exceeds samples 1-10",
            improved);

  auto log_a = normalized_step_log(dir_a);
  auto log_b = normalized_step_log(dir_b);
  bool reproducible = !log_a.empty() && log_a == log_b &&
                      a.predictions == b.predictions && a.playbook == b.playbook;
  criterion("e2e: run is bit-reproducible (identical step logs, timing "
            "fields excluded)",
            reproducible);

  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  criterion("e2e: runtime < 10 s", secs < 10.0, std::to_string(secs) + " s");
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

void label_hygiene() {
  ArithEnvTask task(20);
  SimRun run = make_sim_run(make_arith_sim_backend(), task);
  AdaptationConfig cfg = online_config();
  cfg.use_ground_truth = false;
  RunResult result = online_adapt(task.samples(), cfg, run.comp);

  // The framework must never inject a ground-truth answer. A label string
  // may legitimately appear if the model itself produced it as an answer;
  // anything else is leakage.
  bool clean = true;
  auto log = run.gateway->request_log();
  for (const auto& req : log)
    if (req.prompt_text.find("Expected answer") != std::string::npos)
      clean = false;
  for (const auto& sample : task.samples()) {
    const std::string& label = *sample.label;
    bool self_emitted = std::any_of(
        result.predictions.begin(), result.predictions.end(),
        [&](const std::string& p) { return p.find(label) != std::string::npos; });
    if (self_emitted) continue;
    for (const auto& req : log)
      if (req.prompt_text.find(label) != std::string::npos) clean = false;
  }
  criterion("label-hygiene: no prompt contains an injected ground-truth label",
            clean);

  size_t n = result.records.size();
  bool improved = n == 20 && accuracy_over(result.records, n / 2, n) >
                                 accuracy_over(result.records, 0, n / 2);
  criterion("label-hygiene: arith-env improves from execution feedback alone",
            improved);
}

void accounting_exactness() {
  fs::path dir = fs::temp_directory_path() / "ace_accept_accounting";
  fs::remove_all(dir);

  LookupQaTask task(10);
  SimRun run = make_sim_run(make_lookup_sim_backend(), task);
  online_adapt(task.samples(), online_config(), run.comp, std::nullopt,
               dir.string());

  // Every sim response declares the same usage, so totals are call counts
  // times that usage.
  TagTotals total = run.gateway->ledger().total();
  bool totals_ok = total.input_tokens == total.calls * kSimUsage.input_tokens &&
                   total.output_tokens == total.calls * kSimUsage.output_tokens;
  criterion("accounting: ledger totals equal sum of declared usages", totals_ok);

  PriceTable prices{0.27, 1.10};
  double expected = total.input_tokens * 0.27 / 1000.0 +
                    total.output_tokens * 1.10 / 1000.0;
  double got = run.gateway->ledger().cost(prices);
  criterion("accounting: cost matches hand-computed value to the cent",
            std::abs(got - expected) < 0.005);

  RunSummary summary = report(dir.string(), prices);
  long long generator_requests = 0;
  {
    std::ifstream in(dir / "prompts.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (nlohmann::json::parse(line)["tag"] == "generator")
        ++generator_requests;
    }
  }
  criterion("accounting: report rollouts equal generator requests in the log",
            summary.rollouts == generator_requests &&
                generator_requests == static_cast<long long>(task.samples().size()));
  fs::remove_all(dir);
}

void protocol_conformance() {
  // Predict-before-update: the generator request for the first occurrence
  // of a key must precede any request mentioning that key's fact, and must
  // not contain the fact itself.
  LookupQaTask task(20);
  SimRun run = make_sim_run(make_lookup_sim_backend(), task);
  RunResult result = online_adapt(task.samples(), online_config(), run.comp);

  bool predict_first = true;
  auto log = run.gateway->request_log();
  std::set<std::string> seen_keys;
  size_t log_cursor = 0;
  for (size_t t = 0; t < task.samples().size(); ++t) {
    const Sample& s = task.samples()[t];
    std::string key = s.query.substr(s.query.find("key-"));
    key.resize(key.find('?'));
    std::string fact = key + " -> " + *s.label;
    // find this step's generator request in order
    while (log_cursor < log.size() && log[log_cursor].tag != "generator")
      ++log_cursor;
    if (log_cursor >= log.size()) {
      predict_first = false;
      break;
    }
    const LoggedRequest& gen_req = log[log_cursor++];
    bool first_occurrence = seen_keys.insert(key).second;
    if (first_occurrence &&
        gen_req.prompt_text.find(fact) != std::string::npos)
      predict_first = false;  // update leaked into its own prediction
  }
  criterion("protocol: predict-before-update holds on every online step",
            predict_first && result.records.size() == task.samples().size());

  // Offline early stop: the Curator contributes two lessons and then goes
  // quiet, so epoch 3 (index 2) is quiescent and epochs 4-5 never run.
  auto quiescent_backend = std::make_shared<CallbackBackend>(
      [](const ChatRequest& req) -> ChatResponse {
        ChatResponse resp;
        resp.usage = kSimUsage;
        std::string prompt;
        for (const auto& m : req.messages) prompt += m.content + "\n";
        if (req.tag == "generator") {
          resp.content = "FINAL: unknown";
        } else if (req.tag == "reflector") {
          resp.content =
              R"({"insights":[{"kind":"strategy","text":"keep refining the approach","section":"strategies"}],"done":true})";
        } else {  // curator counts existing lessons in the digest
          int lessons = 0;
          size_t pos = 0;
          while ((pos = prompt.find("lesson number", pos)) != std::string::npos) {
            ++lessons;
            pos += 1;
          }
          nlohmann::json ops = nlohmann::json::array();
          if (lessons < 2)
            ops.push_back({{"op", "ADD"},
                           {"section", "strategies"},
                           {"content",
                            "lesson number " + std::to_string(lessons + 1)}});
          resp.content = nlohmann::json{{"ops", ops}}.dump();
        }
        return resp;
      });
  StaticTaskAdapter one_task({{"t1", "a question", "an answer"}});
  SimRun offline_run = make_sim_run(quiescent_backend, one_task);
  AdaptationConfig cfg;
  cfg.mode = AdaptMode::kOffline;
  cfg.max_epochs = 5;
  cfg.refine_policy.mode = RefineMode::kLazy;
  cfg.refine_policy.token_budget = 100000;
  RunResult offline = offline_adapt(one_task.samples(), cfg, offline_run.comp);
  bool early_stop = offline.records.size() == 3 &&
                    offline.records.back().epoch == 2 &&
                    offline.playbook.bullets().size() == 2;
  criterion("protocol: offline max_epochs=5 stops early at the quiescent "
            "third epoch",
            early_stop,
            std::to_string(offline.records.size()) + " records");
}

}  // namespace

int main() {
  run_criterion("merge-algebra", merge_algebra_suite);
  run_criterion("mark-permutation", mark_permutation_property);
  run_criterion("refine", refine_suite);
  run_criterion("collapse", collapse_criteria);
  run_criterion("e2e", end_to_end_scripted);
  run_criterion("label-hygiene", label_hygiene);
  run_criterion("accounting", accounting_exactness);
  run_criterion("protocol", protocol_conformance);

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                : std::to_string(g_failures) + " CRITERIA FAILED")
            << "\n";
  return g_failures == 0 ? 0 : 1;
}
