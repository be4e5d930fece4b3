#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ace/errors.hpp"
#include "ace/gateway.hpp"
#include "doctest.h"

using namespace ace;

namespace {

ChatRequest simple_request(const std::string& content, const std::string& tag) {
  ChatRequest req;
  req.messages = {{"system", "sys"}, {"user", content}};
  req.tag = tag;
  return req;
}

}  // namespace

TEST_CASE("scripted backend echoes the exact fixture") {
  auto backend = std::make_shared<ScriptedBackend>();
  ChatRequest req = simple_request("hello there", "generator");
  backend->add_exact(prompt_key(req), {"hello", {10, 5}});

  Gateway gw(backend);
  ChatResponse resp = gw.complete(req);
  CHECK(resp.content == "hello");
  CHECK(resp.usage.input_tokens == 10);
  CHECK(resp.usage.output_tokens == 5);
}

TEST_CASE("unmatched prompt is a fixture miss naming the key") {
  Gateway gw(std::make_shared<ScriptedBackend>());
  ChatRequest req = simple_request("no fixture for this", "generator");
  std::string key = prompt_key(req);
  try {
    gw.complete(req);
    FAIL("expected FixtureMissError");
  } catch (const FixtureMissError& e) {
    CHECK(std::string(e.what()).find(key) != std::string::npos);
  }
}

TEST_CASE("pattern fallback matches substrings in registration order") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_pattern("alpha", {"first", {1, 1}});
  backend->add_pattern("beta", {"second", {1, 1}});
  Gateway gw(backend);
  CHECK(gw.complete(simple_request("contains alpha and beta", "t")).content ==
        "first");
  CHECK(gw.complete(simple_request("only beta here", "t")).content == "second");
}

TEST_CASE("scripted backend is deterministic over a request sequence") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_pattern("q1", {"a1", {3, 1}});
  backend->add_pattern("q2", {"a2", {4, 2}});
  auto run = [&] {
    std::vector<std::string> outs;
    Gateway gw(backend);
    outs.push_back(gw.complete(simple_request("q1", "t")).content);
    outs.push_back(gw.complete(simple_request("q2", "t")).content);
    outs.push_back(gw.complete(simple_request("q1", "t")).content);
    return outs;
  };
  CHECK(run() == run());
}

TEST_CASE("ledger accumulates exact totals per tag") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_pattern("one", {"r1", {10, 5}});
  backend->add_pattern("two", {"r2", {20, 7}});
  Gateway gw(backend);
  gw.complete(simple_request("one", "generator"));
  gw.complete(simple_request("two", "generator"));

  TagTotals t = gw.ledger().totals().at("generator");
  CHECK(t.calls == 2);
  CHECK(t.input_tokens == 30);
  CHECK(t.output_tokens == 12);
  CHECK(t.errors == 0);
}

TEST_CASE("failed calls are ledgered with zero output and an error flag") {
  Gateway gw(std::make_shared<ScriptedBackend>());
  CHECK_THROWS_AS(gw.complete(simple_request("boom", "curator")),
                  FixtureMissError);
  TagTotals t = gw.ledger().totals().at("curator");
  CHECK(t.calls == 1);
  CHECK(t.errors == 1);
  CHECK(t.output_tokens == 0);
}

TEST_CASE("cost formula") {
  UsageLedger ledger;
  SUBCASE("empty ledger costs zero") {
    CHECK(ledger.cost({0.27, 1.10}) == doctest::Approx(0.0));
  }
  SUBCASE("hand-computed cost") {
    ledger.record("generator", {1000000, 0}, 0, false);
    CHECK(ledger.cost({0.27, 1.10}) == doctest::Approx(270.0));
  }
  SUBCASE("linearity") {
    ledger.record("a", {1234, 567}, 0, false);
    double once = ledger.cost({0.5, 2.0});
    ledger.record("a", {1234, 567}, 0, false);
    CHECK(ledger.cost({0.5, 2.0}) == doctest::Approx(2.0 * once));
  }
}

TEST_CASE("request validation") {
  Gateway gw(std::make_shared<ScriptedBackend>());
  ChatRequest empty;
  CHECK_THROWS_AS(gw.complete(empty), ValidationError);
  ChatRequest assistant_first;
  assistant_first.messages = {{"assistant", "hi"}};
  CHECK_THROWS_AS(gw.complete(assistant_first), ValidationError);
}

TEST_CASE("request log preserves order and tags") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_pattern("x", {"r", {1, 1}});
  Gateway gw(backend);
  gw.complete(simple_request("x 1", "generator"));
  gw.complete(simple_request("x 2", "reflector"));
  auto log = gw.request_log();
  REQUIRE(log.size() == 2);
  CHECK(log[0].tag == "generator");
  CHECK(log[1].tag == "reflector");
  CHECK(log[0].seq < log[1].seq);
  CHECK(log[1].prompt_text.find("x 2") != std::string::npos);
}

TEST_CASE("fixture file round trip") {
  namespace fs = std::filesystem;
  std::string path = (fs::temp_directory_path() / "ace_fixtures.json").string();
  {
    std::ofstream out(path);
    out << R"({"exact":{},"patterns":[{"match":"ping","content":"pong",
              "usage":{"input_tokens":2,"output_tokens":1}}]})";
  }
  ScriptedBackend backend = ScriptedBackend::from_file(path);
  ChatResponse resp = backend.complete(simple_request("ping", "t"));
  CHECK(resp.content == "pong");
  CHECK(resp.usage.input_tokens == 2);
  std::remove(path.c_str());
}
