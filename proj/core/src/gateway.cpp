#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "ace/errors.hpp"
#include "ace/gateway.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ace {

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string flatten(const ChatRequest& req) {
  std::string s;
  for (const auto& m : req.messages) {
    s += m.role;
    s += ':';
    s += m.content;
    s += '\n';
  }
  return s;
}

void validate_request(const ChatRequest& req) {
  if (req.messages.empty())
    throw ValidationError("chat request has no messages");
  const std::string& first = req.messages.front().role;
  if (first != "system" && first != "user")
    throw ValidationError("first message role must be system or user");
}

}  // namespace

std::string prompt_key(const ChatRequest& req) {
  return sha256_hex(flatten(req));
}

void ScriptedBackend::add_exact(const std::string& key, Fixture fx) {
  exact_[key] = std::move(fx);
}

void ScriptedBackend::add_pattern(const std::string& substring, Fixture fx) {
  patterns_.emplace_back(substring, std::move(fx));
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read fixture file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("fixture file " + path + ": " + e.what());
  }
  ScriptedBackend backend;
  auto parse_fixture = [](const nlohmann::json& j) {
    Fixture fx;
    fx.content = j.at("content").get<std::string>();
    if (j.contains("usage")) {
      fx.usage.input_tokens = j["usage"].value("input_tokens", 0);
      fx.usage.output_tokens = j["usage"].value("output_tokens", 0);
    }
    return fx;
  };
  if (doc.contains("exact"))
    for (auto& [key, j] : doc["exact"].items())
      backend.add_exact(key, parse_fixture(j));
  if (doc.contains("patterns"))
    for (auto& j : doc["patterns"])
      backend.add_pattern(j.at("match").get<std::string>(), parse_fixture(j));
  return backend;
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
  const std::string key = prompt_key(req);
  const Fixture* hit = nullptr;
  if (auto it = exact_.find(key); it != exact_.end()) {
    hit = &it->second;
  } else {
    const std::string text = flatten(req);
    for (const auto& [needle, fx] : patterns_) {
      if (text.find(needle) != std::string::npos) {
        hit = &fx;
        break;
      }
    }
  }
  if (!hit)
    throw FixtureMissError("no fixture for prompt-key " + key +
                           " (tag=" + req.tag + ")");
  ChatResponse resp;
  resp.content = hit->content;
  resp.usage = hit->usage;
  resp.latency_ms = 0;
  return resp;
}

HttpBackend::HttpBackend(std::string base_url, std::string api_key,
                         std::string model, int max_retries)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      max_retries_(max_retries) {}

ChatResponse HttpBackend::complete(const ChatRequest& req) {
  nlohmann::json body;
  body["model"] = model_;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_output_tokens;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : req.messages)
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(250 << (attempt - 1)));
    auto start = std::chrono::steady_clock::now();
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post("/chat/completions", headers, body.dump(),
                           "application/json");
    auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    if (!res) {
      last_error = "transport error";
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw GatewayError("chat endpoint returned status " +
                         std::to_string(res->status));
    try {
      auto doc = nlohmann::json::parse(res->body);
      ChatResponse out;
      out.content =
          doc.at("choices").at(0).at("message").at("content").get<std::string>();
      if (doc.contains("usage")) {
        out.usage.input_tokens = doc["usage"].value("prompt_tokens", 0);
        out.usage.output_tokens = doc["usage"].value("completion_tokens", 0);
      }
      out.latency_ms = wall;
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(std::string("chat response malformed: ") + e.what());
    }
  }
  throw GatewayError("chat request failed after retries: " + last_error);
}

void UsageLedger::record(const std::string& tag, const Usage& usage,
                         long long wall_ms, bool error) {
  std::lock_guard<std::mutex> lock(mu_);
  TagTotals& t = by_tag_[tag];
  ++t.calls;
  t.input_tokens += usage.input_tokens;
  t.output_tokens += usage.output_tokens;
  t.wall_ms += wall_ms;
  if (error) ++t.errors;
}

std::map<std::string, TagTotals> UsageLedger::totals() const {
  std::lock_guard<std::mutex> lock(mu_);
  return by_tag_;
}

TagTotals UsageLedger::total() const {
  TagTotals sum;
  for (const auto& [tag, t] : totals()) {
    sum.calls += t.calls;
    sum.input_tokens += t.input_tokens;
    sum.output_tokens += t.output_tokens;
    sum.wall_ms += t.wall_ms;
    sum.errors += t.errors;
  }
  return sum;
}

double UsageLedger::cost(const PriceTable& prices) const {
  TagTotals t = total();
  return t.input_tokens * prices.input_per_1k / 1000.0 +
         t.output_tokens * prices.output_per_1k / 1000.0;
}

std::map<std::string, double> UsageLedger::cost_by_tag(
    const PriceTable& prices) const {
  std::map<std::string, double> out;
  for (const auto& [tag, t] : totals())
    out[tag] = t.input_tokens * prices.input_per_1k / 1000.0 +
               t.output_tokens * prices.output_per_1k / 1000.0;
  return out;
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend)
    : backend_(std::move(backend)) {}

ChatResponse Gateway::complete(const ChatRequest& req) {
  validate_request(req);
  {
    std::lock_guard<std::mutex> lock(log_mu_);
    log_.push_back({req.tag, "", seq_});
    log_.back().prompt_text = [&] {
      std::string s;
      for (const auto& m : req.messages) {
        s += m.role;
        s += ':';
        s += m.content;
        s += '\n';
      }
      return s;
    }();
    ++seq_;
  }
  auto start = std::chrono::steady_clock::now();
  try {
    ChatResponse resp = backend_->complete(req);
    auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    if (resp.latency_ms == 0) resp.latency_ms = wall;
    ledger_.record(req.tag, resp.usage, resp.latency_ms, false);
    return resp;
  } catch (...) {
    auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    // Failed calls still hit the ledger, with zero output tokens.
    ledger_.record(req.tag, Usage{0, 0}, wall, true);
    throw;
  }
}

std::vector<LoggedRequest> Gateway::request_log() const {
  std::lock_guard<std::mutex> lock(log_mu_);
  return log_;
}

}  // namespace ace
