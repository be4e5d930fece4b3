// End-to-end tests for the ace CLI binary. The binary path comes from the
// ACE_CLI_BIN environment variable set by CMake.
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "ace/playbook.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_bin() {
  const char* bin = std::getenv("ACE_CLI_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "ACE_CLI_BIN not set");
  return bin;
}

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  std::string cmd = cli_bin() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  std::array<char, 512> buf;
  while (fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "ace_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

fs::path write_scripted_config(const fs::path& dir) {
  fs::path fixtures = dir / "fixtures.json";
  write_file(fixtures, R"({
    "patterns": [
      {"match": "You are the Reflector",
       "content": "{\"insights\":[{\"kind\":\"domain_fact\",\"text\":\"France capital is Paris\",\"section\":\"domain_concepts\"}],\"marks\":[],\"done\":true}",
       "usage": {"input_tokens": 50, "output_tokens": 20}},
      {"match": "You are the Curator",
       "content": "{\"ops\":[{\"op\":\"ADD\",\"section\":\"domain_concepts\",\"content\":\"France capital is Paris\"}]}",
       "usage": {"input_tokens": 40, "output_tokens": 15}},
      {"match": "capital of France",
       "content": "FINAL: Paris",
       "usage": {"input_tokens": 30, "output_tokens": 5}}
    ]
  })");
  fs::path config = dir / "config.json";
  write_file(config, R"({
    "gateway": {"backend": "scripted", "fixture_file": ")" +
                         fixtures.string() + R"("},
    "embedder": {"provider": "hashing"},
    "prices": {"input_per_1k": 0.27, "output_per_1k": 1.10},
    "adaptation": {"mode": "offline", "max_epochs": 1, "batch_size": 1,
                   "refine": {"mode": "lazy", "token_budget": 100000}}
  })");
  return config;
}

}  // namespace

TEST_CASE("adapt writes a complete run directory") {
  fs::path dir = scratch_dir() / "adapt_run";
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());

  fs::path config = write_scripted_config(dir.parent_path());
  fs::path tasks = dir.parent_path() / "tasks.jsonl";
  write_file(tasks,
             R"({"id":"t1","query":"What is the capital of France?","label":"Paris"})"
             "\n");

  CommandResult r = run_cli("adapt --mode offline --config " + config.string() +
                            " --tasks " + tasks.string() + " --out " +
                            dir.string());
  CAPTURE(r.output);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "steps.jsonl"));
  CHECK(fs::exists(dir / "playbook_final.json"));
  CHECK(fs::exists(dir / "playbook_epoch_0.json"));

  ace::Playbook pb = ace::load((dir / "playbook_final.json").string());
  REQUIRE(pb.bullets().size() == 1);
  CHECK(pb.bullets()[0].content == "France capital is Paris");

  SUBCASE("report surfaces the four metrics") {
    CommandResult rep = run_cli("report --run " + dir.string() + " --config " +
                                config.string() + " --format json");
    CAPTURE(rep.output);
    CHECK(rep.exit_code == 0);
    auto summary = nlohmann::json::parse(rep.output);
    CHECK(summary["rollouts"] == 1);
    CHECK(summary.contains("accuracy"));
    CHECK(summary.contains("adaptation_latency_s"));
    CHECK(summary.contains("token_cost"));
    // 30+50+40 input, 5+20+15 output at the configured prices
    double expected_cost = 120 * 0.27 / 1000.0 + 40 * 1.10 / 1000.0;
    CHECK(summary["token_cost"].get<double>() ==
          doctest::Approx(expected_cost));
    CHECK(fs::exists(dir / "summary.json"));
  }
}

TEST_CASE("missing config exits with code 2") {
  CommandResult r = run_cli("adapt --out /tmp/ace_nowhere");
  CHECK(r.exit_code == 2);
  CommandResult r2 = run_cli("adapt --config /nonexistent.json --out /tmp/ace_nowhere");
  CHECK(r2.exit_code == 2);
}

TEST_CASE("report on a missing directory fails") {
  CommandResult r = run_cli("report --run /nonexistent/run/dir");
  CHECK(r.exit_code != 0);
}

TEST_CASE("playbook subcommands") {
  fs::path dir = scratch_dir();
  fs::path pb_path = dir / "playbook.json";

  ace::Playbook pb = ace::new_playbook({"strategies", "general"}, 8000);
  pb.advance_step(1);
  pb.append_bullet("strategies", "identical duplicate content", pb.step());
  pb.append_bullet("strategies", "identical duplicate content", pb.step());
  ace::save(pb, pb_path.string());

  SUBCASE("inspect prints both ids") {
    CommandResult r = run_cli("playbook inspect " + pb_path.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("pb-00001") != std::string::npos);
    CHECK(r.output.find("pb-00002") != std::string::npos);
  }
  SUBCASE("dedup merges duplicates into a new file") {
    fs::path out = dir / "deduped.json";
    CommandResult r = run_cli("playbook dedup " + pb_path.string() +
                              " --threshold 0.9 --out " + out.string());
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK(ace::load(out.string()).bullets().size() == 1);
    // source untouched
    CHECK(ace::load(pb_path.string()).bullets().size() == 2);
  }
  SUBCASE("dedup refuses in-place rewrite without --force") {
    CommandResult r = run_cli("playbook dedup " + pb_path.string());
    CHECK(r.exit_code == 2);
  }
  SUBCASE("prune under budget is a byte-identical no-op with a notice") {
    fs::path out = dir / "pruned.json";
    CommandResult r =
        run_cli("playbook prune " + pb_path.string() + " --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("no bullets pruned") != std::string::npos);
    std::ifstream a(pb_path), b(out);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }
  SUBCASE("export emits the rendered prompt text") {
    CommandResult r = run_cli("playbook export " + pb_path.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("## strategies") != std::string::npos);
    CHECK(r.output.find("identical duplicate content") != std::string::npos);
  }
}
