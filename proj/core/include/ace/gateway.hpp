#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ace {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::string tag;  // accounting label: "generator", "reflector", "curator"
};

struct Usage {
  long long input_tokens = 0;
  long long output_tokens = 0;
};

struct ChatResponse {
  std::string content;
  Usage usage;
  long long latency_ms = 0;
};

/// Canonical prompt key: SHA-256 hex of the concatenated "role:content\n"
/// lines. Scripted fixtures match on this.
std::string prompt_key(const ChatRequest& req);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

/// Deterministic test backend. Looks up the exact prompt key first, then
/// falls back to substring patterns in registration order. A miss raises
/// FixtureMissError naming the key; there is no silent fallback.
class ScriptedBackend : public ChatBackend {
 public:
  struct Fixture {
    std::string content;
    Usage usage;
  };

  void add_exact(const std::string& key, Fixture fx);
  void add_pattern(const std::string& substring, Fixture fx);
  /// Loads {"exact":{key:{content,usage}}, "patterns":[{match,content,usage}]}.
  static ScriptedBackend from_file(const std::string& path);

  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::map<std::string, Fixture> exact_;
  std::vector<std::pair<std::string, Fixture>> patterns_;
};

/// Test/simulation backend driven by a callback. Used to script role
/// behavior that depends on the incoming prompt.
class CallbackBackend : public ChatBackend {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse complete(const ChatRequest& req) override { return fn_(req); }

 private:
  Fn fn_;
};

/// OpenAI-compatible chat-completions backend. Retries timeouts, 429 and
/// 5xx with exponential backoff up to max_retries, then throws GatewayError
/// carrying the last status.
class HttpBackend : public ChatBackend {
 public:
  HttpBackend(std::string base_url, std::string api_key, std::string model,
              int max_retries = 3);
  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  int max_retries_;
};

struct PriceTable {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
};

struct TagTotals {
  long long calls = 0;
  long long input_tokens = 0;
  long long output_tokens = 0;
  long long wall_ms = 0;
  long long errors = 0;
};

/// Per-tag running totals of every complete() call, successful or not.
class UsageLedger {
 public:
  void record(const std::string& tag, const Usage& usage, long long wall_ms,
              bool error);
  std::map<std::string, TagTotals> totals() const;
  TagTotals total() const;
  /// dollar cost = sum(input*in_rate/1000 + output*out_rate/1000)
  double cost(const PriceTable& prices) const;
  std::map<std::string, double> cost_by_tag(const PriceTable& prices) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, TagTotals> by_tag_;
};

struct LoggedRequest {
  std::string tag;
  std::string prompt_text;  // concatenated role:content lines
  int seq = 0;
};

/// Uniform chat access: delegates to a backend, records usage and latency
/// in the ledger under the request tag, and keeps an ordered request log
/// for provenance and hygiene scans. Safe for concurrent complete() calls.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ChatBackend> backend);

  ChatResponse complete(const ChatRequest& req);

  const UsageLedger& ledger() const { return ledger_; }
  std::vector<LoggedRequest> request_log() const;

 private:
  std::shared_ptr<ChatBackend> backend_;
  UsageLedger ledger_;
  mutable std::mutex log_mu_;
  std::vector<LoggedRequest> log_;
  int seq_ = 0;
};

}  // namespace ace
