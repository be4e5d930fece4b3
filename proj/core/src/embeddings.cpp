#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <thread>

#include "ace/embeddings.hpp"
#include "ace/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ace {

namespace {

// FNV-1a with a seed mixed in; stable across platforms.
uint64_t hash_token(const std::string& token, uint64_t seed) {
  uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void l2_normalize(std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 <= 0.0) return;
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
}

}  // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw ValidationError("cosine: dimension mismatch " +
                          std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw ValidationError("cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
}

int HashingEmbedder::bucket(const std::string& token) const {
  return static_cast<int>(hash_token(token, kSeed) % static_cast<uint64_t>(dim_));
}

EmbeddingVector HashingEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("embed: empty text");
  std::vector<double> counts(dim_, 0.0);
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      counts[bucket(token)] += 1.0;
      token.clear();
    }
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else
      flush();
  }
  flush();
  l2_normalize(counts);
  return {std::move(counts)};
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::string api_key,
                           std::string model, int max_retries)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      max_retries_(max_retries) {}

EmbeddingVector HttpEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("embed: empty text");
  nlohmann::json body = {{"model", model_}, {"input", {text}}};
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    httplib::Client client(base_url_);
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post("/embeddings", headers, body.dump(),
                           "application/json");
    if (!res) {
      last_error = "transport error";
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProviderError("embedding endpoint returned status " +
                          std::to_string(res->status));
    try {
      auto doc = nlohmann::json::parse(res->body);
      auto& vec = doc.at("data").at(0).at("embedding");
      EmbeddingVector out;
      out.values = vec.get<std::vector<double>>();
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("embedding response malformed: ") +
                          e.what());
    }
  }
  throw ProviderError("embedding request failed after retries: " + last_error);
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<Embedder> inner)
    : inner_(std::move(inner)) {}

std::string CachingEmbedder::name() const { return inner_->name(); }

EmbeddingVector CachingEmbedder::embed(const std::string& text) {
  std::string key = inner_->name() + '\x1f' + text;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  EmbeddingVector v = inner_->embed(text);
  std::lock_guard<std::mutex> lock(mu_);
  cache_[key] = v;
  return v;
}

size_t CachingEmbedder::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

}  // namespace ace
