#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tagshot/categories.hpp"
#include "tagshot/corpus.hpp"
#include "tagshot/embedding.hpp"

namespace tagshot::testing {

inline std::filesystem::path data_dir() { return TAGSHOT_TEST_DATA; }
inline std::filesystem::path fixture20() { return data_dir() / "fixture20.jsonl"; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tagshot-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(TempDir const&) = delete;
  TempDir& operator=(TempDir const&) = delete;

  std::filesystem::path const& path() const { return path_; }
  std::filesystem::path operator/(std::string const& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(std::filesystem::path const& p, std::string const& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(std::filesystem::path const& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Short pseudo-Japanese text built from a small syllable pool, so unrelated
/// records still share characters.
inline std::string random_text(std::mt19937_64& rng, std::size_t min_len = 6, std::size_t max_len = 24) {
  static constexpr char const* kPool[] = {"薬", "剤", "投", "与", "確", "認", "患", "者", "処", "方", "誤",
                                          "量", "時", "間", "看", "護", "師", "医", "指", "示", "検", "査"};
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kPool) - 1);
  std::string s;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) s += kPool[pick(rng)];
  return s;
}

/// Corpus with `counts[c]` records in each category plus `untagged` records
/// without a tag. Ids are consecutive integers in shuffled category order.
inline std::vector<IncidentRecord> synthetic_records(std::array<std::size_t, kCategoryCount> const& counts,
                                                     std::size_t untagged, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::optional<BroadCategory>> slots;
  for (auto c : all_categories()) slots.insert(slots.end(), counts[category_index(c)], c);
  slots.insert(slots.end(), untagged, std::nullopt);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<IncidentRecord> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    IncidentRecord r;
    r.id = std::to_string(i);
    r.details = random_text(rng);
    r.background = random_text(rng);
    r.prevention = random_text(rng);
    if (slots[i]) {
      r.raw_tag = std::string(category_name(*slots[i]));
      r.category = slots[i];
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Record counts matching the published per-category table.
inline std::array<std::size_t, kCategoryCount> reference_counts() {
  std::array<std::size_t, kCategoryCount> counts{};
  for (auto c : all_categories()) counts[category_index(c)] = expected_count(c);
  return counts;
}

inline void write_jsonl(std::filesystem::path const& p, std::vector<IncidentRecord> const& records) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  for (auto const& r : records) {
    nlohmann::json j{{"id", r.id}, {"details", r.details}, {"background", r.background}, {"prevention", r.prevention}};
    if (r.raw_tag) j["tag"] = *r.raw_tag;
    out << j.dump() << "\n";
  }
}

/// httplib server on an ephemeral local port, run on a background thread.
class LocalServer {
 public:
  LocalServer() = default;
  ~LocalServer() { stop(); }
  LocalServer(LocalServer const&) = delete;
  LocalServer& operator=(LocalServer const&) = delete;

  httplib::Server& server() { return server_; }

  void start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

/// Stand-in for the scorer service backed by HashedNgramEmbedder.
class FakeScorerServer {
 public:
  explicit FakeScorerServer(std::size_t dim = 64) : embedder_(dim) {
    auto& s = server_.server();
    s.Post("/embed", [this](httplib::Request const& req, httplib::Response& res) {
      ++embed_requests;
      auto body = nlohmann::json::parse(req.body);
      auto texts = body.at("texts").get<std::vector<std::string>>();
      for (auto const& t : texts) {
        if (t.empty()) {
          res.status = 400;
          res.set_content(R"({"detail":"empty text"})", "application/json");
          return;
        }
      }
      texts_seen += texts.size();
      nlohmann::json vecs = nlohmann::json::array();
      for (auto const& v : embedder_.embed(texts)) vecs.push_back(v.values);
      nlohmann::json out{{"model_id", "fake-sentence@rev1"}, {"dim", embedder_.embed({"x"})[0].dim()}, {"vectors", vecs}};
      res.set_content(out.dump(), "application/json");
    });
    s.Post("/token_embed", [this](httplib::Request const& req, httplib::Response& res) {
      ++token_requests;
      auto body = nlohmann::json::parse(req.body);
      auto te = embedder_.token_embed(body.at("text").get<std::string>());
      nlohmann::json out{{"model_id", "fake-token@rev1"},
                         {"tokens", te.tokens},
                         {"vectors", te.vectors},
                         {"special_mask", te.special_mask}};
      res.set_content(out.dump(), "application/json");
    });
    s.Get("/health", [](httplib::Request const&, httplib::Response& res) {
      nlohmann::json out{{"status", "ok"},
                         {"models", {{"sentence", "fake-sentence"}, {"token", "fake-token"}}},
                         {"revisions", {{"sentence", "rev1"}, {"token", "rev1"}}}};
      res.set_content(out.dump(), "application/json");
    });
    server_.start();
  }

  std::string url() const { return server_.url(); }

  std::atomic<std::size_t> embed_requests{0};
  std::atomic<std::size_t> token_requests{0};
  std::atomic<std::size_t> texts_seen{0};

 private:
  HashedNgramEmbedder embedder_;
  LocalServer server_;
};

}  // namespace tagshot::testing
