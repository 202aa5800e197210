#include <doctest.h>

#include <cmath>

#include "tagshot/embedding.hpp"
#include "tagshot/error.hpp"
#include "test_support.hpp"

using namespace tagshot;
using tagshot::testing::FakeScorerServer;
using tagshot::testing::TempDir;

namespace {

ScorerEndpoint endpoint_for(std::string const& url) {
  ScorerEndpoint e;
  e.base_url = url;
  e.timeout = std::chrono::seconds(5);
  e.retry.max_attempts = 2;
  e.retry.base_delay = std::chrono::milliseconds(1);
  e.retry.max_delay = std::chrono::milliseconds(2);
  return e;
}

}  // namespace

TEST_SUITE("embedding") {

TEST_CASE("fake embedder is deterministic and order preserving") {
  HashedNgramEmbedder e(64);
  auto v = e.embed({"薬剤の取り違え", "転倒", "薬剤の取り違え"});
  REQUIRE(v.size() == 3);
  CHECK(v[0] == v[2]);
  CHECK(v[0] != v[1]);
  CHECK(v[0].dim() == 64);
  auto again = e.embed({"転倒"});
  CHECK(again[0] == v[1]);

  auto t = e.token_embed("薬剤");
  CHECK(t.tokens.size() == t.vectors.size());
  CHECK(t.tokens.size() == t.special_mask.size());
  CHECK(t.special_mask.front());
  CHECK(t.special_mask.back());
  CHECK(t.content_only().tokens == std::vector<std::string>{"薬", "剤"});
}

TEST_CASE("lexically close texts score higher under the fake embedder") {
  HashedNgramEmbedder e(256);
  auto v = e.embed({"抗菌薬の投与を忘れた", "抗菌薬の投与を一回忘れた", "ベッド柵が破損していた"});
  CHECK(cosine(v[0], v[1]) > cosine(v[0], v[2]));
}

TEST_CASE("embed_batch rejects empty input and deduplicates") {
  HashedNgramEmbedder e(16);
  CHECK_THROWS_AS(embed_batch({}, e, nullptr), EmbeddingError);
  CHECK_THROWS_AS(embed_batch({"a", ""}, e, nullptr), EmbeddingError);
  auto v = embed_batch({"x", "y", "x"}, e, nullptr, {1, 2});
  REQUIRE(v.size() == 3);
  CHECK(v[0] == v[2]);
}

TEST_CASE("retry delays are exponential and capped") {
  RetryPolicy r;
  r.base_delay = std::chrono::milliseconds(100);
  r.max_delay = std::chrono::milliseconds(350);
  CHECK(r.delay_for(1).count() == 100);
  CHECK(r.delay_for(2).count() == 200);
  CHECK(r.delay_for(3).count() == 350);
  CHECK(r.delay_for(10).count() == 350);
}

TEST_CASE("scorer client against a local scorer service") {
  FakeScorerServer server(32);
  HttpScorerClient client(endpoint_for(server.url()));

  CHECK(client.model_id() == "fake-sentence@rev1");
  CHECK(client.token_model_id() == "fake-token@rev1");
  CHECK(client.health()["status"] == "ok");

  auto v = client.embed({"一", "二", "三"});
  REQUIRE(v.size() == 3);
  HashedNgramEmbedder local(32);
  auto want = local.embed({"一", "二", "三"});
  for (std::size_t i = 0; i < 3; ++i) CHECK(v[i].values == want[i].values);

  auto t = client.token_embed("薬剤師");
  CHECK(t.tokens.size() == t.vectors.size());
  CHECK(t.special_mask.size() == t.tokens.size());
  CHECK(t.model_id == "fake-token@rev1");

  CHECK_THROWS_AS(client.embed({""}), EmbeddingError);
}

TEST_CASE("embedding cache serves repeats without network calls") {
  FakeScorerServer server(16);
  HttpScorerClient client(endpoint_for(server.url()));
  TempDir dir;
  {
    EmbeddingCache cache(dir.path(), client.model_id());
    auto first = embed_batch({"a", "b", "a"}, client, &cache);
    CHECK(server.texts_seen == 2);
    auto second = embed_batch({"a", "b"}, client, &cache);
    CHECK(server.texts_seen == 2);
    CHECK(second[0] == first[0]);
  }
  // Reload from disk, plus a corrupt trailing line.
  EmbeddingCache reloaded(dir.path(), client.model_id());
  {
    std::ofstream out(reloaded.file(), std::ios::app);
    out << "{\"key\": \"trunc";
  }
  EmbeddingCache again(dir.path(), client.model_id());
  CHECK(again.size() == 2);
  CHECK(again.discarded() == 1);
  embed_batch({"a", "b", "c"}, client, &again);
  CHECK(server.texts_seen == 3);
}

TEST_CASE("unreachable scorer surfaces an EmbeddingError") {
  auto e = endpoint_for("http://127.0.0.1:1");
  e.timeout = std::chrono::seconds(1);
  HttpScorerClient client(e);
  CHECK_THROWS_AS(client.embed({"a"}), EmbeddingError);
  CHECK(client.request_count() == 2);
}

TEST_CASE("index rejects zero vectors and mismatched dimensions") {
  CHECK_THROWS_AS(EmbeddingIndex::from_vectors({"a"}, {{{0.0, 0.0}, "m"}}), EmbeddingError);
  CHECK_THROWS_AS(EmbeddingIndex::from_vectors({"a", "b"}, {{{1.0, 0.0}, "m"}, {{1.0}, "m"}}), EmbeddingError);
  auto idx = EmbeddingIndex::from_vectors({"a", "b"}, {{{1.0, 0.0}, "m"}, {{0.0, 2.0}, "m"}});
  CHECK(idx.scan(idx.vector("a")) == idx.scan_serial(idx.vector("a")));
  CHECK_THROWS(idx.vector("zzz"));
}

}  // TEST_SUITE
