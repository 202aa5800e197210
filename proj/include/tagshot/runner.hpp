#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagshot/corpus.hpp"
#include "tagshot/embedding.hpp"
#include "tagshot/llm.hpp"
#include "tagshot/metrics.hpp"
#include "tagshot/output_validation.hpp"
#include "tagshot/selection.hpp"

namespace tagshot {

struct ProviderConfig {
  std::string kind = "mock";  // "http" or "mock"
  ChatEndpoint endpoint;
  std::string model = "gpt-4o";
  double temperature = 0.0;
  std::optional<int> max_tokens;
  /// Mock behaviour for prompts not in the script: "echo", "reference"
  /// (answers with the input's reference sections), or "blocked".
  std::string mock_mode = "echo";
  std::string mock_script;
};

struct ScorerConfig {
  std::string kind = "fake";  // "http" or "fake"
  ScorerEndpoint endpoint;
  std::string cache_dir;  // empty: no disk cache
  std::size_t fake_dim = 256;
  std::size_t batch_size = 64;
};

struct EvaluationConfig {
  /// Evaluate every record rather than only the tagged subset.
  bool all_records = false;
  /// Tag-based inputs without a usable category use the random set instead
  /// of failing.
  bool tag_fallback_random = false;
  std::optional<std::size_t> limit;
};

struct ExperimentConfig {
  std::string corpus_path;
  FieldMap field_map;
  std::string label_map_path;
  bool lenient = false;

  std::vector<Strategy> strategies{Strategy::ZeroShot, Strategy::Random, Strategy::Similarity, Strategy::TagBased};
  std::size_t k = kDefaultShots;
  std::uint64_t seed = 42;

  ProviderConfig llm;
  ScorerConfig scorer;
  std::string tokenization = "character";
  BertScoreOptions bertscore;
  DetectorConfig detectors;
  std::string prompt_template = "ja";

  EvaluationConfig evaluation;
  std::string output_dir = "runs/latest";
  std::size_t parallelism = 4;
  bool compute_mean_similarity = true;
};

/// Full serialization. `output_dir` is included here but left out of the
/// snapshot embedded in reports (see config_snapshot).
nlohmann::json to_json(ExperimentConfig const& c);
ExperimentConfig experiment_config_from_json(nlohmann::json const& j);
nlohmann::json config_snapshot(ExperimentConfig const& c);

struct Aggregates {
  TargetScores background;
  TargetScores prevention;

  bool operator==(Aggregates const&) const = default;
};

/// Arithmetic means over all cases, zero-scored ones included. Throws
/// Error on an empty list.
Aggregates aggregate(std::span<const CaseScores> cases);

struct StrategyReport {
  Strategy strategy = Strategy::ZeroShot;
  std::vector<CaseScores> cases;
  Aggregates aggregates;
  std::map<OutcomeStatus, std::size_t> outcome_counts;
  std::optional<double> mean_similarity;
  /// Fixed example ids: {"random": [...]} or {"<category>": [...]}.
  nlohmann::json example_sets = nlohmann::json::object();

  bool operator==(StrategyReport const&) const = default;
};

struct RunReport {
  nlohmann::json config;
  std::map<std::string, std::string> model_ids;
  std::vector<std::string> eval_ids;
  /// Records shown as fixed examples, hence not evaluated.
  std::vector<std::string> excluded_ids;
  std::vector<StrategyReport> strategies;

  bool operator==(RunReport const&) const = default;
};

nlohmann::json to_json(RunReport const& r);
RunReport run_report_from_json(nlohmann::json const& j);

std::string report_json(RunReport const& r);
std::string report_csv(RunReport const& r);
std::string report_markdown(RunReport const& r);

enum class ReportFormat { Json, Csv, Markdown };

/// Writes report.json, cases.csv or report.md into `dir`.
std::filesystem::path export_report(RunReport const& r, ReportFormat format, std::filesystem::path const& dir);

/// Test and tooling seams; null members fall back to the configured kinds.
struct RunHooks {
  std::shared_ptr<Provider> provider;
  std::shared_ptr<SentenceEmbedder> sentence_embedder;
  std::shared_ptr<TokenEmbedder> token_embedder;
};

namespace layout {
inline constexpr char kConfig[] = "config.json";
inline constexpr char kResponses[] = "responses.jsonl";
inline constexpr char kCases[] = "cases.csv";
inline constexpr char kReport[] = "report.json";
inline constexpr char kMarkdown[] = "report.md";
inline constexpr char kIncomplete[] = "INCOMPLETE";
}  // namespace layout

/// Runs every configured strategy over one shared evaluation-input set and
/// writes the output directory. Resumes from responses.jsonl when present.
/// On a fatal error the INCOMPLETE marker stays behind and the error
/// propagates.
RunReport run_experiment(ExperimentConfig const& config, RunHooks const& hooks = {});

std::shared_ptr<Provider> make_provider(ExperimentConfig const& config, Corpus const& corpus);

/// Re-scores a response log against the corpus without model calls.
std::vector<CaseScores> rescore_log(ExperimentConfig const& config, std::filesystem::path const& log_path,
                                    RunHooks const& hooks = {});

std::string cases_csv(std::span<const CaseScores> cases);

}  // namespace tagshot
