#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace ace {

struct EmbeddingVector {
  std::vector<double> values;
  int dim() const { return static_cast<int>(values.size()); }
};

/// Standard cosine similarity. Throws ValidationError on dimension mismatch
/// or an all-zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Deterministic per provider+text. Throws ValidationError on empty text,
  /// ProviderError on backend failure.
  virtual EmbeddingVector embed(const std::string& text) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic offline embedder: splits on non-alphanumerics, hashes each
/// token into one of `dim` buckets with a fixed seed, accumulates counts,
/// L2-normalizes. Network-free default for tests and refine.
class HashingEmbedder : public Embedder {
 public:
  static constexpr int kDefaultDim = 256;
  static constexpr uint64_t kSeed = 0x9e3779b97f4a7c15ull;

  explicit HashingEmbedder(int dim = kDefaultDim);
  EmbeddingVector embed(const std::string& text) override;
  std::string name() const override { return "hashing-" + std::to_string(dim_); }

  /// Bucket a single token hashes to; exposed so tests can construct
  /// collision-free inputs.
  int bucket(const std::string& token) const;

 private:
  int dim_;
};

/// Remote provider speaking an OpenAI-compatible /embeddings endpoint.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::string api_key, std::string model,
               int max_retries = 3);
  EmbeddingVector embed(const std::string& text) override;
  std::string name() const override { return "http:" + model_; }

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  int max_retries_;
};

/// In-memory cache keyed on (provider name, text). Values are deterministic
/// so concurrent recomputation is benign; last write wins.
class CachingEmbedder : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<Embedder> inner);
  EmbeddingVector embed(const std::string& text) override;
  std::string name() const override;
  size_t cache_size() const;

 private:
  std::shared_ptr<Embedder> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

}  // namespace ace
