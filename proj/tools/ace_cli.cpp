// ace: operator entry points for adaptation runs, evaluation, playbook
// inspection and run reporting.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ace/adaptation.hpp"
#include "ace/errors.hpp"
#include "ace/harness.hpp"
#include "ace/refine.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? v : fallback;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ace::ConfigError("cannot read config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw ace::ParseError("config file " + path + ": " + e.what());
  }
  return cfg;
}

ace::AdaptationConfig adaptation_config(const json& cfg,
                                        const std::string& mode_flag) {
  ace::AdaptationConfig out;
  json a = cfg.value("adaptation", json::object());
  std::string mode = mode_flag.empty() ? a.value("mode", "offline") : mode_flag;
  if (mode == "offline")
    out.mode = ace::AdaptMode::kOffline;
  else if (mode == "online")
    out.mode = ace::AdaptMode::kOnline;
  else
    throw ace::ConfigError("unknown adaptation mode: " + mode);
  out.max_epochs = a.value("max_epochs", 5);
  out.max_reflection_rounds = a.value("max_reflection_rounds", 5);
  out.batch_size = a.value("batch_size", 1);
  out.use_ground_truth = a.value("use_ground_truth", true);
  out.seed = a.value("seed", 0u);
  out.generator_temperature = a.value("generator_temperature", 0.0);
  json r = a.value("refine", json::object());
  std::string rmode = r.value("mode", "proactive");
  if (rmode == "proactive")
    out.refine_policy.mode = ace::RefineMode::kProactive;
  else if (rmode == "lazy")
    out.refine_policy.mode = ace::RefineMode::kLazy;
  else
    throw ace::ConfigError("unknown refine mode: " + rmode);
  out.refine_policy.dedup_threshold = r.value("dedup_threshold", 0.90);
  out.refine_policy.token_budget = r.value("token_budget", 8000);
  return out;
}

std::shared_ptr<ace::ChatBackend> make_backend(const json& cfg) {
  json g = cfg.value("gateway", json::object());
  std::string kind = g.value("backend", "http");
  if (kind == "scripted") {
    std::string fixture = g.value("fixture_file", "");
    if (fixture.empty())
      throw ace::ConfigError("scripted gateway needs gateway.fixture_file");
    return std::make_shared<ace::ScriptedBackend>(
        ace::ScriptedBackend::from_file(fixture));
  }
  if (kind == "http") {
    std::string base = env_or("ACE_API_BASE", g.value("base_url", ""));
    std::string key = env_or("ACE_API_KEY", g.value("api_key", ""));
    std::string model = env_or("ACE_MODEL", g.value("model", ""));
    if (base.empty() || model.empty())
      throw ace::ConfigError(
          "http gateway needs base_url and model (config or ACE_API_BASE / "
          "ACE_MODEL)");
    return std::make_shared<ace::HttpBackend>(base, key, model);
  }
  throw ace::ConfigError("unknown gateway backend: " + kind);
}

std::shared_ptr<ace::Embedder> make_embedder(const json& cfg) {
  json e = cfg.value("embedder", json::object());
  std::string kind = e.value("provider", "hashing");
  std::shared_ptr<ace::Embedder> inner;
  if (kind == "hashing") {
    inner = std::make_shared<ace::HashingEmbedder>(
        e.value("dim", ace::HashingEmbedder::kDefaultDim));
  } else if (kind == "http") {
    std::string base = env_or("ACE_API_BASE", e.value("base_url", ""));
    std::string key = env_or("ACE_API_KEY", e.value("api_key", ""));
    std::string model = env_or("ACE_EMBED_MODEL", e.value("model", ""));
    if (base.empty() || model.empty())
      throw ace::ConfigError("http embedder needs base_url and model");
    inner = std::make_shared<ace::HttpEmbedder>(base, key, model);
  } else {
    throw ace::ConfigError("unknown embedding provider: " + kind);
  }
  return std::make_shared<ace::CachingEmbedder>(inner);
}

std::unique_ptr<ace::TaskAdapter> make_adapter(const json& cfg,
                                               const std::string& tasks_path) {
  json t = cfg.value("task", json::object());
  std::string kind = t.value("adapter", "file");
  if (kind == "lookup-qa")
    return std::make_unique<ace::LookupQaTask>(t.value("n_facts", 20),
                                               t.value("seed", 7u));
  if (kind == "arith-env")
    return std::make_unique<ace::ArithEnvTask>(t.value("n_samples", 20),
                                               t.value("seed", 11u));
  if (kind == "file") {
    if (tasks_path.empty())
      throw ace::ConfigError("file task adapter needs --tasks <file>");
    return std::make_unique<ace::StaticTaskAdapter>(
        ace::load_samples(tasks_path), cfg.value("preamble", ""));
  }
  throw ace::ConfigError("unknown task adapter: " + kind);
}

ace::PriceTable price_table(const json& cfg) {
  json p = cfg.value("prices", json::object());
  return {p.value("input_per_1k", 0.0), p.value("output_per_1k", 0.0)};
}

ace::PromptLibrary prompt_library(const json& cfg) {
  std::string dir = cfg.value("prompts_dir", "");
  return dir.empty() ? ace::PromptLibrary::defaults()
                     : ace::PromptLibrary::load_dir(dir);
}

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const std::string& run_dir, const std::string& command,
                    const std::string& config_path, unsigned seed,
                    const std::string& started, const std::string& finished) {
  ordered_json m{{"command", command},
                 {"config", config_path},
                 {"seed", seed},
                 {"started_at", started},
                 {"finished_at", finished},
                 {"artifacts",
                  {{"config_snapshot", "config.json"},
                   {"step_log", "steps.jsonl"},
                   {"prompt_log", "prompts.jsonl"},
                   {"ledger", "ledger.json"},
                   {"final_playbook", "playbook_final.json"}}}};
  std::ofstream out(fs::path(run_dir) / "manifest.json");
  out << m.dump(2) << "\n";
}

int cmd_adapt(const std::string& config_path, const std::string& mode_flag,
              const std::string& tasks_path, const std::string& out_dir,
              const std::string& warmup_path) {
  json cfg = load_config(config_path);
  ace::AdaptationConfig acfg = adaptation_config(cfg, mode_flag);

  ace::Gateway gateway(make_backend(cfg));
  auto embedder = make_embedder(cfg);
  auto adapter = make_adapter(cfg, tasks_path);

  ace::Components comp;
  comp.gateway = &gateway;
  comp.embedder = embedder.get();
  comp.counter = ace::default_token_counter();
  comp.prompts = prompt_library(cfg);
  comp.adapter = adapter.get();

  std::string started = now_iso8601();
  fs::create_directories(out_dir);

  ace::RunResult result;
  if (acfg.mode == ace::AdaptMode::kOffline) {
    result = ace::offline_adapt(adapter->samples(), acfg, comp, out_dir);
  } else {
    std::optional<ace::Playbook> warmup;
    if (!warmup_path.empty()) warmup = ace::load(warmup_path);
    result = ace::online_adapt(adapter->samples(), acfg, comp, warmup, out_dir);
  }
  write_manifest(out_dir, "adapt", config_path, acfg.seed, started,
                 now_iso8601());

  std::cout << "run complete: " << result.records.size() << " steps, "
            << result.playbook.bullets().size() << " bullets, playbook at "
            << (fs::path(out_dir) / "playbook_final.json").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& playbook_path,
             const std::string& tasks_path) {
  json cfg = load_config(config_path);
  ace::Playbook pb = ace::load(playbook_path);
  ace::Gateway gateway(make_backend(cfg));
  auto adapter = make_adapter(cfg, tasks_path);
  ace::EvalResult result =
      ace::run_eval(pb, *adapter, gateway, prompt_library(cfg));
  std::cout << "accuracy: " << result.accuracy << " over "
            << result.per_sample.size() << " samples\n";
  for (const auto& r : result.per_sample) {
    std::cout << "  " << r.sample_id << ": " << (r.correct ? "ok" : "wrong")
              << (r.gateway_error ? " (gateway error)" : "") << "\n";
  }
  return 0;
}

int cmd_playbook_inspect(const std::string& path) {
  ace::Playbook pb = ace::load(path);
  std::map<std::string, int> counts;
  for (const auto& b : pb.bullets()) ++counts[b.section];
  std::cout << ace::render(pb) << "\n\n";
  std::cout << "step " << pb.step() << ", next_id " << pb.next_id()
            << ", budget " << pb.token_budget() << "\n";
  for (const auto& s : pb.sections())
    std::cout << "  " << s << ": " << counts[s] << " bullets\n";
  return 0;
}

int resolve_out(const std::string& in, std::string& out, bool force) {
  if (out.empty()) {
    if (!force) {
      std::cerr << "refusing to rewrite " << in
                << " in place; pass --out <file> or --force\n";
      return 2;
    }
    out = in;
  }
  return 0;
}

int cmd_playbook_dedup(const std::string& path, std::string out_path,
                       double threshold, bool force) {
  if (int rc = resolve_out(path, out_path, force)) return rc;
  ace::Playbook pb = ace::load(path);
  ace::HashingEmbedder embedder;
  auto [next, report] = ace::dedup(pb, embedder, threshold);
  ace::save(next, out_path);
  std::cout << "merged " << report.merged_pairs.size() << " duplicates; "
            << next.bullets().size() << " bullets -> " << out_path << "\n";
  return 0;
}

int cmd_playbook_prune(const std::string& path, std::string out_path,
                       bool force) {
  if (int rc = resolve_out(path, out_path, force)) return rc;
  ace::Playbook pb = ace::load(path);
  auto [next, report] =
      ace::prune_to_budget(pb, ace::default_token_counter());
  ace::save(next, out_path);
  if (report.pruned_ids.empty())
    std::cout << "already within budget (" << report.tokens_after << " <= "
              << pb.token_budget() << " tokens); no bullets pruned\n";
  else
    std::cout << "pruned " << report.pruned_ids.size() << " bullets ("
              << report.tokens_before << " -> " << report.tokens_after
              << " tokens) -> " << out_path << "\n";
  return 0;
}

int cmd_playbook_export(const std::string& path) {
  std::cout << ace::render(ace::load(path)) << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& config_path,
               const std::string& format) {
  ace::PriceTable prices;
  if (!config_path.empty()) prices = price_table(load_config(config_path));
  ace::RunSummary summary = ace::report(run_dir, prices);
  std::string text = ace::summary_to_text(summary);
  std::string as_json = ace::summary_to_json(summary);
  if (format == "json")
    std::cout << as_json << "\n";
  else
    std::cout << text;
  std::ofstream out(fs::path(run_dir) / "summary.json");
  out << as_json << "\n";
  std::ofstream tout(fs::path(run_dir) / "summary.txt");
  tout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ace: evolving-playbook context adaptation"};
  app.require_subcommand(1);

  std::string config_path, mode_flag, tasks_path, out_dir, warmup_path;
  auto* adapt = app.add_subcommand("adapt", "run an adaptation loop");
  adapt->add_option("--config", config_path, "config file")->required();
  adapt->add_option("--mode", mode_flag, "offline|online");
  adapt->add_option("--tasks", tasks_path, "task file (jsonl)");
  adapt->add_option("--out", out_dir, "run directory")->required();
  adapt->add_option("--warmup", warmup_path, "initial playbook (online mode)");

  std::string eval_config, eval_playbook, eval_tasks;
  auto* eval = app.add_subcommand("eval", "evaluate a frozen playbook");
  eval->add_option("--config", eval_config, "config file")->required();
  eval->add_option("--playbook", eval_playbook, "playbook file")->required();
  eval->add_option("--tasks", eval_tasks, "task file (jsonl)");

  auto* playbook = app.add_subcommand("playbook", "playbook utilities");
  playbook->require_subcommand(1);
  std::string pb_path, pb_out;
  double pb_threshold = 0.90;
  bool pb_force = false;
  auto* inspect = playbook->add_subcommand("inspect", "print rendered playbook");
  inspect->add_option("file", pb_path)->required();
  auto* dedup = playbook->add_subcommand("dedup", "merge near-duplicates");
  dedup->add_option("file", pb_path)->required();
  dedup->add_option("--out", pb_out, "output file");
  dedup->add_option("--threshold", pb_threshold, "cosine threshold");
  dedup->add_flag("--force", pb_force, "allow in-place rewrite");
  auto* prune = playbook->add_subcommand("prune", "prune to token budget");
  prune->add_option("file", pb_path)->required();
  prune->add_option("--out", pb_out, "output file");
  prune->add_flag("--force", pb_force, "allow in-place rewrite");
  auto* exp = playbook->add_subcommand("export", "emit rendered prompt text");
  exp->add_option("file", pb_path)->required();

  std::string report_dir, report_config, report_format = "text";
  auto* report = app.add_subcommand("report", "summarize a completed run");
  report->add_option("--run", report_dir, "run directory")->required();
  report->add_option("--config", report_config, "config file (for prices)");
  report->add_option("--format", report_format, "text|json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (adapt->parsed())
      return cmd_adapt(config_path, mode_flag, tasks_path, out_dir, warmup_path);
    if (eval->parsed()) return cmd_eval(eval_config, eval_playbook, eval_tasks);
    if (playbook->parsed()) {
      if (inspect->parsed()) return cmd_playbook_inspect(pb_path);
      if (dedup->parsed())
        return cmd_playbook_dedup(pb_path, pb_out, pb_threshold, pb_force);
      if (prune->parsed()) return cmd_playbook_prune(pb_path, pb_out, pb_force);
      if (exp->parsed()) return cmd_playbook_export(pb_path);
    }
    if (report->parsed()) return cmd_report(report_dir, report_config, report_format);
  } catch (const ace::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
