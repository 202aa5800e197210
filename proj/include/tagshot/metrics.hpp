#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagshot/corpus.hpp"
#include "tagshot/embedding.hpp"
#include "tagshot/llm.hpp"
#include "tagshot/output_validation.hpp"
#include "tagshot/selection.hpp"

namespace tagshot {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  /// F1 is the harmonic mean, 0 when P + R = 0.
  static PRF from(double precision, double recall);
  bool operator==(PRF const&) const = default;
};

void to_json(nlohmann::json& j, PRF const& p);
void from_json(nlohmann::json const& j, PRF& p);

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string mode;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string mode() const = 0;
  virtual TokenSequence tokenize(std::string_view text) const = 0;
};

/// NFKC, drop whitespace, one token per Unicode scalar value.
class CharacterTokenizer final : public Tokenizer {
 public:
  std::string mode() const override { return "character"; }
  TokenSequence tokenize(std::string_view text) const override;
};

/// NFKC, split on Unicode whitespace.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string mode() const override { return "whitespace"; }
  TokenSequence tokenize(std::string_view text) const override;
};

/// "character" or "whitespace"; morphological tokenizers implement
/// Tokenizer directly. Throws ConfigError for other names.
std::unique_ptr<Tokenizer> make_tokenizer(std::string const& mode);

/// Clipped n-gram overlap. Throws MetricError when the modes differ or n = 0.
PRF rouge_n(TokenSequence const& candidate, TokenSequence const& reference, std::size_t n);

/// LCS-based precision/recall/F1. Throws MetricError when the modes differ.
PRF rouge_l(TokenSequence const& candidate, TokenSequence const& reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

using IdfTable = std::unordered_map<std::string, double>;

/// idf(w) = ln((M + 1) / (df(w) + 1)) over M reference token lists; tokens
/// not in the table get ln(M + 1).
struct IdfWeights {
  IdfTable table;
  std::size_t documents = 0;

  double weight(std::string const& token) const;
  static IdfWeights build(std::vector<std::vector<std::string>> const& documents);
};

struct BertScoreOptions {
  bool idf = false;
  /// When set, P, R and F1 are rescaled as (x - b) / (1 - b).
  std::optional<double> baseline;
  bool use_parallel_kernels = true;

  bool operator==(BertScoreOptions const&) const = default;
};

void to_json(nlohmann::json& j, BertScoreOptions const& o);
void from_json(nlohmann::json const& j, BertScoreOptions& o);

/// Greedy-matching BERTScore over token vectors. Special tokens are removed
/// first; throws MetricError if either side is left empty. Scores are clamped
/// to [0, 1].
PRF bert_score(TokenEmbedding const& candidate, TokenEmbedding const& reference, BertScoreOptions const& opts = {},
               IdfWeights const* idf = nullptr);

PRF bert_score(std::string const& candidate, std::string const& reference, TokenEmbedder& scorer,
               BertScoreOptions const& opts = {}, IdfWeights const* idf = nullptr);

struct TargetScores {
  PRF rouge1;
  PRF rougel;
  PRF bertscore;

  bool operator==(TargetScores const&) const = default;
};

struct CaseScores {
  std::string input_id;
  Strategy strategy = Strategy::ZeroShot;
  OutcomeStatus status = OutcomeStatus::Ok;
  std::optional<MalformedKind> malformed;
  std::optional<std::string> reason;
  TargetScores background;
  TargetScores prevention;
  /// Ids of the few-shot examples shown for this case.
  std::vector<std::string> example_ids;

  bool operator==(CaseScores const&) const = default;
};

nlohmann::json to_json(CaseScores const& c);
CaseScores case_scores_from_json(nlohmann::json const& j);

/// Gateway outcome after output validation.
struct ClassifiedOutcome {
  OutcomeStatus status = OutcomeStatus::TransportError;
  std::optional<ParsedAnswer> answer;
  std::optional<MalformedPattern> malformed;
  std::optional<std::string> reason;
};

ClassifiedOutcome classify(GenerationOutcome const& outcome, std::size_t n_examples, DetectorConfig const& config = {});

struct ScoringContext {
  Tokenizer const& tokenizer;
  TokenEmbedder& token_embedder;
  BertScoreOptions bertscore;
  IdfWeights const* idf_background = nullptr;
  IdfWeights const* idf_prevention = nullptr;
};

/// Ok outcomes are scored per section against the reference; every other
/// status gets all-zero scores. A blank reference section scores zero.
CaseScores score_case(ClassifiedOutcome const& outcome, IncidentRecord const& reference, ScoringContext const& ctx);

}  // namespace tagshot
