#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tagshot/corpus.hpp"

namespace tagshot {

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t dim() const { return values.size(); }
  bool operator==(EmbeddingVector const&) const = default;
};

/// Throws EmbeddingError on empty, non-finite or dimension-inconsistent input.
void validate_vector(EmbeddingVector const& v);

/// Cosine similarity clamped to [-1, 1]. Throws EmbeddingError on dimension
/// mismatch or a zero-norm operand.
double cosine(EmbeddingVector const& u, EmbeddingVector const& v);
double cosine(std::span<const double> u, std::span<const double> v);

/// Contextual token vectors for one text, as served by /token_embed.
struct TokenEmbedding {
  std::string model_id;
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> vectors;
  std::vector<bool> special_mask;

  /// Copy without the special/padding tokens.
  TokenEmbedding content_only() const;
};

class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual std::string model_id() = 0;
  /// One vector per text, same order. May be called concurrently.
  virtual std::vector<EmbeddingVector> embed(std::vector<std::string> const& texts) = 0;
};

class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual std::string model_id() = 0;
  virtual TokenEmbedding token_embed(std::string const& text) = 0;
};

/// Deterministic offline embedder. Sentence vectors are signed feature-hashed
/// character unigram+bigram counts of the NFKC text, so lexically close texts
/// score high. Token vectors are per-character hash-derived unit vectors with
/// [CLS]/[SEP] specials, which gives exact self-similarity for BERTScore.
class HashedNgramEmbedder final : public SentenceEmbedder, public TokenEmbedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dim = 256);

  std::string model_id() override;
  std::vector<EmbeddingVector> embed(std::vector<std::string> const& texts) override;
  TokenEmbedding token_embed(std::string const& text) override;

  std::size_t embed_calls() const { return embed_calls_.load(); }

 private:
  std::size_t dim_;
  std::atomic<std::size_t> embed_calls_{0};
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};

  /// Delay before retry number `attempt` (1-based), exponential and capped.
  std::chrono::milliseconds delay_for(int attempt) const;
};

struct ScorerEndpoint {
  std::string base_url = "http://127.0.0.1:8765";
  std::string sentence_model;  // empty: service default
  std::string token_model;     // empty: service default
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
};

/// Client for the scorer service: POST /embed, POST /token_embed, GET /health.
class HttpScorerClient final : public SentenceEmbedder, public TokenEmbedder {
 public:
  explicit HttpScorerClient(ScorerEndpoint endpoint);

  std::string model_id() override;
  std::vector<EmbeddingVector> embed(std::vector<std::string> const& texts) override;
  TokenEmbedding token_embed(std::string const& text) override;

  nlohmann::json health();

  std::string token_model_id();

  std::size_t request_count() const { return requests_.load(); }

 private:
  nlohmann::json post(std::string const& path, nlohmann::json const& body);

  ScorerEndpoint endpoint_;
  std::atomic<std::size_t> requests_{0};
  std::mutex model_mu_;
  std::optional<std::string> sentence_model_id_;
  std::optional<std::string> token_model_id_;
};

/// On-disk vector cache, one JSONL file per model id; each line is
/// {"key": sha256(text), "values": [...]}. Lines that fail to parse or have
/// the wrong dimension are dropped on load and refetched.
class EmbeddingCache {
 public:
  EmbeddingCache(std::filesystem::path dir, std::string model_id);

  std::optional<std::vector<double>> get(std::string const& key) const;
  void put(std::string const& key, std::vector<double> const& values);

  std::size_t size() const;
  std::size_t discarded() const { return discarded_; }
  std::filesystem::path const& file() const { return file_; }

  static std::string key_for(std::string_view text);

 private:
  std::filesystem::path file_;
  std::string model_id_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::vector<double>> entries_;
  std::optional<std::size_t> dim_;
  std::size_t discarded_ = 0;
};

struct EmbedOptions {
  std::size_t batch_size = 64;
  std::size_t parallelism = 1;
};

/// Embeds `texts` through `cache` (may be null) and `embedder`. Duplicate
/// texts are requested once. Throws EmbeddingError for empty input, an empty
/// text, or inconsistent dimensions.
std::vector<EmbeddingVector> embed_batch(std::vector<std::string> const& texts, SentenceEmbedder& embedder,
                                         EmbeddingCache* cache, EmbedOptions const& opts = {});

/// Exact-scan index of sentence embeddings keyed by record id.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  static EmbeddingIndex from_vectors(std::vector<std::string> ids, std::vector<EmbeddingVector> const& vectors);

  /// Embeds the details field of every corpus record.
  static EmbeddingIndex build(Corpus const& corpus, SentenceEmbedder& embedder, EmbeddingCache* cache,
                              EmbedOptions const& opts = {});

  std::string const& model_id() const { return model_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  std::vector<std::string> const& ids() const { return ids_; }

  bool contains(std::string const& id) const { return row_.contains(id); }
  std::optional<std::size_t> row_of(std::string const& id) const {
    auto it = row_.find(id);
    if (it == row_.end()) return std::nullopt;
    return it->second;
  }
  std::span<const double> vector(std::string const& id) const;
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  /// Cosine of `query` against every row, parallel kernel.
  std::vector<double> scan(std::span<const double> query) const;
  std::vector<double> scan_serial(std::span<const double> query) const;

 private:
  std::string model_id_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> row_;
};

}  // namespace tagshot
