#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagshot/corpus.hpp"
#include "tagshot/embedding.hpp"

namespace tagshot {

enum class Strategy { ZeroShot, Random, Similarity, TagBased };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);

inline constexpr std::size_t kDefaultShots = 5;

/// Few-shot examples chosen for one prompt (or for a fixed set of prompts).
struct ExampleSet {
  std::vector<IncidentRecord> examples;
  Strategy strategy = Strategy::ZeroShot;
  std::optional<std::uint64_t> seed;
  std::optional<BroadCategory> source_category;
  std::optional<std::string> query_id;
  /// Query cosine per example; similarity strategy only.
  std::vector<double> similarities;

  std::vector<std::string> ids() const;
  bool operator==(ExampleSet const&) const = default;
};

nlohmann::json to_json(ExampleSet const& s);

/// Record-id ordering used for tie-breaks: all-digit ids compare numerically,
/// anything else compares bytewise, and numeric ids sort first.
bool id_less(std::string_view a, std::string_view b);

/// Per-category example sets, written at most once per category.
class SelectionCache {
 public:
  /// Returns the cached set for `c`, running `make` only if none exists. Under
  /// concurrent calls exactly one `make` result is kept.
  ExampleSet get_or_create(BroadCategory c, std::function<ExampleSet()> const& make);

  std::optional<ExampleSet> find(BroadCategory c) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<BroadCategory, ExampleSet> entries_;
};

ExampleSet zero_shot(std::optional<std::string> query_id = std::nullopt);

/// k distinct records drawn uniformly from the whole corpus.
ExampleSet select_random(Corpus const& corpus, std::size_t k, std::uint64_t seed);

/// Similarities are ranked after rounding to 12 decimal places, so scores that
/// differ only by floating-point noise tie and fall back to id order.
inline constexpr double kSimilarityTieScale = 1e12;
std::int64_t similarity_rank_key(double score);

/// The k records whose details embeddings are most cosine-similar to the
/// query's, excluding the query itself; descending similarity, ties by id.
ExampleSet select_similar(Corpus const& corpus, IncidentRecord const& query, std::size_t k,
                          EmbeddingIndex const& index);

/// Tag-based selection: k records drawn uniformly from the records of
/// `category`, fixed per category through `cache`. The draw uses the stream
/// derive_seed(seed, category index + 1).
ExampleSet select_tag_based(Corpus const& corpus, BroadCategory category, std::size_t k, std::uint64_t seed,
                            SelectionCache& cache);

/// Mean over (query, set) pairs of the average query-example cosine, grouped
/// by strategy. Sets without examples are ignored. Throws SelectionError on
/// an empty list.
std::map<Strategy, double> mean_query_example_similarity(
    std::vector<std::pair<std::string, ExampleSet>> const& selections, EmbeddingIndex const& index);

}  // namespace tagshot
