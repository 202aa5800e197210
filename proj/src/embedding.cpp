#include "tagshot/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "tagshot/error.hpp"
#include "tagshot/kernels.hpp"
#include "tagshot/rng.hpp"
#include "tagshot/text.hpp"
#include "tagshot/workers.hpp"

namespace tagshot {

using nlohmann::json;

void validate_vector(EmbeddingVector const& v) {
  if (v.values.empty()) throw EmbeddingError("embedding has zero dimensions");
  for (double x : v.values) {
    if (!std::isfinite(x)) throw EmbeddingError("embedding contains a non-finite value");
  }
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw EmbeddingError("dimension mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  auto zero = [](std::span<const double> x) {
    for (double e : x)
      if (e != 0.0) return false;
    return true;
  };
  if (zero(u) || zero(v)) throw EmbeddingError("cosine of a zero-norm vector");
  return kernels::cosine(u, v);
}

double cosine(EmbeddingVector const& u, EmbeddingVector const& v) {
  return cosine(std::span<const double>(u.values), std::span<const double>(v.values));
}

TokenEmbedding TokenEmbedding::content_only() const {
  TokenEmbedding out;
  out.model_id = model_id;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i < special_mask.size() && special_mask[i]) continue;
    out.tokens.push_back(tokens[i]);
    out.vectors.push_back(vectors[i]);
    out.special_mask.push_back(false);
  }
  return out;
}

// ---------------------------------------------------------------------------
// HashedNgramEmbedder

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<std::string> content_chars(std::string const& text) {
  std::vector<std::string> out;
  for (auto& cp : text::code_points(text::nfkc(text))) {
    std::size_t pos = 0;
    if (text::is_unicode_space(text::decode_utf8(cp, pos))) continue;
    out.push_back(std::move(cp));
  }
  return out;
}

std::vector<double> hashed_unit_vector(std::string_view token, std::size_t dim) {
  std::vector<double> v(dim);
  std::uint64_t state = fnv1a(token);
  double norm = 0.0;
  for (auto& x : v) {
    state = splitmix64(state);
    x = static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw EmbeddingError("embedding dimension must be positive");
}

std::string HashedNgramEmbedder::model_id() { return "fake/hashed-char-ngram-d" + std::to_string(dim_); }

std::vector<EmbeddingVector> HashedNgramEmbedder::embed(std::vector<std::string> const& texts) {
  ++embed_calls_;
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto const& t : texts) {
    auto chars = content_chars(t);
    if (chars.empty()) throw EmbeddingError("cannot embed empty text");
    std::vector<double> v(dim_, 0.0);
    auto add = [&](std::string const& feature) {
      std::uint64_t h = splitmix64(fnv1a(feature));
      double sign = (h >> 63) ? -1.0 : 1.0;
      v[h % dim_] += sign;
    };
    for (std::size_t i = 0; i < chars.size(); ++i) {
      add(chars[i]);
      if (i + 1 < chars.size()) add(chars[i] + chars[i + 1]);
    }
    // Guarantee a non-zero vector even if all features cancel.
    bool all_zero = true;
    for (double x : v) all_zero = all_zero && x == 0.0;
    if (all_zero) v[fnv1a(chars.front()) % dim_] = 1.0;
    out.push_back({std::move(v), model_id()});
  }
  return out;
}

TokenEmbedding HashedNgramEmbedder::token_embed(std::string const& text) {
  auto chars = content_chars(text);
  if (chars.empty()) throw EmbeddingError("cannot token-embed empty text");
  TokenEmbedding te;
  te.model_id = model_id();
  auto push = [&](std::string tok, bool special) {
    te.vectors.push_back(hashed_unit_vector(tok, dim_));
    te.tokens.push_back(std::move(tok));
    te.special_mask.push_back(special);
  };
  push("[CLS]", true);
  for (auto& c : chars) push(std::move(c), false);
  push("[SEP]", true);
  return te;
}

// ---------------------------------------------------------------------------
// EmbeddingCache

namespace {

std::string cache_file_stem(std::string const& model_id) {
  std::string s;
  for (char c : model_id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_';
    s.push_back(ok ? c : '_');
  }
  return s + "-" + text::sha256_hex(model_id).substr(0, 8);
}

}  // namespace

std::string EmbeddingCache::key_for(std::string_view text) { return text::sha256_hex(text); }

EmbeddingCache::EmbeddingCache(std::filesystem::path dir, std::string model_id)
    : file_(dir / (cache_file_stem(model_id) + ".jsonl")), model_id_(std::move(model_id)) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw EmbeddingError("cannot create cache directory " + dir.string() + ": " + ec.message());
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      auto key = j.at("key").get<std::string>();
      auto values = j.at("values").get<std::vector<double>>();
      EmbeddingVector probe{values, model_id_};
      validate_vector(probe);
      if (dim_ && *dim_ != values.size()) throw EmbeddingError("dimension drift");
      dim_ = values.size();
      entries_[key] = std::move(values);
    } catch (std::exception const&) {
      ++discarded_;
    }
  }
}

std::optional<std::vector<double>> EmbeddingCache::get(std::string const& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(std::string const& key, std::vector<double> const& values) {
  std::lock_guard lock(mu_);
  if (entries_.contains(key)) return;
  if (dim_ && *dim_ != values.size()) throw EmbeddingError("cache dimension mismatch for model " + model_id_);
  dim_ = values.size();
  entries_[key] = values;
  std::ofstream out(file_, std::ios::app);
  if (!out) throw EmbeddingError("cannot write embedding cache " + file_.string());
  out << json{{"key", key}, {"values", values}}.dump() + "\n";
  out.flush();
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// embed_batch

std::vector<EmbeddingVector> embed_batch(std::vector<std::string> const& texts, SentenceEmbedder& embedder,
                                         EmbeddingCache* cache, EmbedOptions const& opts) {
  if (texts.empty()) throw EmbeddingError("embed_batch: no texts");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::trim(texts[i]).empty()) throw EmbeddingError("embed_batch: text " + std::to_string(i) + " is empty");
  }
  std::string const model = embedder.model_id();

  std::vector<std::string> keys(texts.size());
  std::unordered_map<std::string, std::vector<double>> resolved;
  std::vector<std::size_t> missing;  // first index of each uncached distinct text
  std::set<std::string> queued;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = EmbeddingCache::key_for(texts[i]);
    if (resolved.contains(keys[i]) || queued.contains(keys[i])) continue;
    if (cache) {
      if (auto hit = cache->get(keys[i])) {
        resolved.emplace(keys[i], std::move(*hit));
        continue;
      }
    }
    queued.insert(keys[i]);
    missing.push_back(i);
  }

  std::size_t const batch = std::max<std::size_t>(opts.batch_size, 1);
  std::size_t const chunks = (missing.size() + batch - 1) / batch;
  std::vector<std::vector<EmbeddingVector>> fetched(chunks);
  for_each_index(chunks, opts.parallelism, [&](std::size_t c) {
    std::vector<std::string> chunk;
    for (std::size_t i = c * batch; i < std::min(missing.size(), (c + 1) * batch); ++i) chunk.push_back(texts[missing[i]]);
    auto got = embedder.embed(chunk);
    if (got.size() != chunk.size()) throw EmbeddingError("embedder returned " + std::to_string(got.size()) + " vectors for " + std::to_string(chunk.size()) + " texts");
    fetched[c] = std::move(got);
  });

  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < fetched[c].size(); ++k) {
      auto& v = fetched[c][k];
      validate_vector(v);
      auto const& key = keys[missing[c * batch + k]];
      if (cache) cache->put(key, v.values);
      resolved.emplace(key, std::move(v.values));
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::optional<std::size_t> dim;
  for (auto const& key : keys) {
    auto const& values = resolved.at(key);
    if (dim && *dim != values.size()) throw EmbeddingError("dimension mismatch within batch");
    dim = values.size();
    out.push_back({values, model});
  }
  return out;
}

// ---------------------------------------------------------------------------
// EmbeddingIndex

EmbeddingIndex EmbeddingIndex::from_vectors(std::vector<std::string> ids, std::vector<EmbeddingVector> const& vectors) {
  if (ids.size() != vectors.size()) throw EmbeddingError("index: id/vector count mismatch");
  EmbeddingIndex idx;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto const& v = vectors[i];
    validate_vector(v);
    if (std::ranges::all_of(v.values, [](double x) { return x == 0.0; })) {
      throw EmbeddingError("index: zero-norm embedding for " + ids[i]);
    }
    if (i == 0) {
      idx.dim_ = v.dim();
      idx.model_id_ = v.model_id;
    } else if (v.dim() != idx.dim_ || v.model_id != idx.model_id_) {
      throw EmbeddingError("index: vectors disagree on dimension or model");
    }
    if (!idx.row_.emplace(ids[i], i).second) throw EmbeddingError("index: duplicate id " + ids[i]);
    idx.data_.insert(idx.data_.end(), v.values.begin(), v.values.end());
  }
  idx.ids_ = std::move(ids);
  return idx;
}

EmbeddingIndex EmbeddingIndex::build(Corpus const& corpus, SentenceEmbedder& embedder, EmbeddingCache* cache,
                                     EmbedOptions const& opts) {
  if (corpus.empty()) return {};
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (auto const& r : corpus.records()) texts.push_back(r.details);
  return from_vectors(corpus.all_ids(), embed_batch(texts, embedder, cache, opts));
}

std::span<const double> EmbeddingIndex::vector(std::string const& id) const {
  auto it = row_.find(id);
  if (it == row_.end()) throw EmbeddingError("no embedding for record '" + id + "'");
  return row(it->second);
}

std::vector<double> EmbeddingIndex::scan(std::span<const double> query) const {
  if (query.size() != dim_) throw EmbeddingError("query dimension mismatch");
  std::vector<double> out(ids_.size());
  kernels::parallel::cosine_scan(query, {data_, dim_}, out);
  return out;
}

std::vector<double> EmbeddingIndex::scan_serial(std::span<const double> query) const {
  if (query.size() != dim_) throw EmbeddingError("query dimension mismatch");
  std::vector<double> out(ids_.size());
  kernels::serial::cosine_scan(query, {data_, dim_}, out);
  return out;
}

}  // namespace tagshot
