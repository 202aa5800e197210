#include "tagshot/selection.hpp"

#include <algorithm>
#include <cmath>
#include <array>

#include "tagshot/error.hpp"
#include "tagshot/rng.hpp"

namespace tagshot {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 4> kStrategyNames{{
    {Strategy::ZeroShot, "zero_shot"},
    {Strategy::Random, "random"},
    {Strategy::Similarity, "similarity"},
    {Strategy::TagBased, "tag_based"},
}};

bool all_digits(std::string_view s) {
  return !s.empty() && std::ranges::all_of(s, [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  for (auto const& [k, v] : kStrategyNames)
    if (k == s) return v;
  return "unknown";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  for (auto const& [k, v] : kStrategyNames)
    if (v == name) return k;
  if (name == "zero-shot") return Strategy::ZeroShot;
  if (name == "tag-based") return Strategy::TagBased;
  return std::nullopt;
}

std::vector<std::string> ExampleSet::ids() const {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (auto const& e : examples) out.push_back(e.id);
  return out;
}

json to_json(ExampleSet const& s) {
  json j{{"strategy", strategy_name(s.strategy)}, {"example_ids", s.ids()}};
  j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
  j["source_category"] = s.source_category ? json(std::string(category_name(*s.source_category))) : json(nullptr);
  j["query_id"] = s.query_id ? json(*s.query_id) : json(nullptr);
  if (!s.similarities.empty()) j["similarities"] = s.similarities;
  return j;
}

bool id_less(std::string_view a, std::string_view b) {
  bool const da = all_digits(a);
  bool const db = all_digits(b);
  if (da && db) {
    auto strip = [](std::string_view s) {
      auto p = s.find_first_not_of('0');
      return p == std::string_view::npos ? std::string_view{} : s.substr(p);
    };
    auto sa = strip(a);
    auto sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  }
  if (da != db) return da;
  return a < b;
}

ExampleSet SelectionCache::get_or_create(BroadCategory c, std::function<ExampleSet()> const& make) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(c);
  if (it != entries_.end()) return it->second;
  return entries_.emplace(c, make()).first->second;
}

std::optional<ExampleSet> SelectionCache::find(BroadCategory c) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(c);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t SelectionCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

ExampleSet zero_shot(std::optional<std::string> query_id) {
  ExampleSet s;
  s.strategy = Strategy::ZeroShot;
  s.query_id = std::move(query_id);
  return s;
}

ExampleSet select_random(Corpus const& corpus, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw SelectionError("k must be positive");
  if (corpus.size() < k) {
    throw SelectionError("random selection needs " + std::to_string(k) + " records, corpus has " + std::to_string(corpus.size()));
  }
  ExampleSet s;
  s.strategy = Strategy::Random;
  s.seed = seed;
  for (auto i : sample_without_replacement(corpus.size(), k, seed)) s.examples.push_back(corpus.records()[i]);
  return s;
}

std::int64_t similarity_rank_key(double score) { return std::llround(score * kSimilarityTieScale); }

ExampleSet select_similar(Corpus const& corpus, IncidentRecord const& query, std::size_t k,
                          EmbeddingIndex const& index) {
  if (k == 0) throw SelectionError("k must be positive");
  auto const qrow = index.row_of(query.id);
  if (!qrow) throw EmbeddingError("no embedding for query '" + query.id + "'");
  auto const scores = index.scan(index.row(*qrow));

  struct Candidate {
    double score;
    std::int64_t rank_key;
    std::size_t record;
  };
  std::vector<Candidate> pool;
  pool.reserve(corpus.size());
  auto const& records = corpus.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id == query.id) continue;
    auto row = index.row_of(records[i].id);
    if (!row) throw EmbeddingError("no embedding for candidate '" + records[i].id + "'");
    pool.push_back({scores[*row], similarity_rank_key(scores[*row]), i});
  }
  if (pool.size() < k) {
    throw SelectionError("similarity pool has " + std::to_string(pool.size()) + " candidates, need " + std::to_string(k));
  }
  auto better = [&](Candidate const& a, Candidate const& b) {
    if (a.rank_key != b.rank_key) return a.rank_key > b.rank_key;
    return id_less(records[a.record].id, records[b.record].id);
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), better);

  ExampleSet s;
  s.strategy = Strategy::Similarity;
  s.query_id = query.id;
  for (std::size_t i = 0; i < k; ++i) {
    s.examples.push_back(records[pool[i].record]);
    s.similarities.push_back(pool[i].score);
  }
  return s;
}

ExampleSet select_tag_based(Corpus const& corpus, BroadCategory category, std::size_t k, std::uint64_t seed,
                            SelectionCache& cache) {
  if (k == 0) throw SelectionError("k must be positive");
  return cache.get_or_create(category, [&] {
    auto const& candidates = corpus.by_category(category);
    if (candidates.size() < k) {
      throw SelectionError("category '" + std::string(category_name(category)) + "' has " +
                           std::to_string(candidates.size()) + " records, need " + std::to_string(k));
    }
    ExampleSet s;
    s.strategy = Strategy::TagBased;
    s.seed = seed;
    s.source_category = category;
    auto const stream = derive_seed(seed, category_index(category) + 1);
    for (auto i : sample_without_replacement(candidates.size(), k, stream)) s.examples.push_back(corpus.at(candidates[i]));
    return s;
  });
}

std::map<Strategy, double> mean_query_example_similarity(
    std::vector<std::pair<std::string, ExampleSet>> const& selections, EmbeddingIndex const& index) {
  if (selections.empty()) throw SelectionError("mean similarity over an empty selection list");
  std::map<Strategy, std::pair<double, std::size_t>> acc;
  for (auto const& [query_id, set] : selections) {
    if (set.examples.empty()) continue;
    auto q = index.vector(query_id);
    double sum = 0.0;
    for (auto const& e : set.examples) sum += cosine(q, index.vector(e.id));
    auto& [total, n] = acc[set.strategy];
    total += sum / static_cast<double>(set.examples.size());
    ++n;
  }
  std::map<Strategy, double> out;
  for (auto const& [s, tn] : acc) out[s] = tn.first / static_cast<double>(tn.second);
  return out;
}

}  // namespace tagshot
