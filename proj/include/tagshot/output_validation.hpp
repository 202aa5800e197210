#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace tagshot {

struct ParsedAnswer {
  std::string background;
  std::string prevention;

  bool operator==(ParsedAnswer const&) const = default;
};

enum class MalformedKind { AnswersAllExamples, AggregatedSummary, Repetition, UnparseableFormat };

std::string_view malformed_kind_name(MalformedKind k);

struct MalformedPattern {
  MalformedKind kind = MalformedKind::UnparseableFormat;
  std::string evidence;

  bool operator==(MalformedPattern const&) const = default;
};

/// Header spellings accepted for each answer section. Matching is exact for
/// non-ASCII aliases and ASCII-case-insensitive otherwise; a header is an
/// alias, optionally wrapped in "**", followed by ':' or '：'.
struct LabelAliases {
  std::string version = "aliases-v1";
  std::vector<std::string> background = {"背景・要因", "背景/要因", "背景要因", "背景・原因", "Background/causal factors",
                                         "Background and causal factors"};
  std::vector<std::string> prevention = {"改善策", "再発防止策", "Preventive measures", "Prevention measures"};
};

struct DetectorConfig {
  /// A token 4-gram seen more than this many times marks Repetition.
  std::size_t repetition_threshold = 10;
  std::size_t repetition_ngram = 4;
  LabelAliases aliases;
};

void to_json(nlohmann::json& j, DetectorConfig const& c);
void from_json(nlohmann::json const& j, DetectorConfig& c);

/// One header occurrence in a completion.
struct LabelHit {
  enum class Section { Background, Prevention } section;
  std::size_t begin = 0;  // start of the header, including leading decoration
  std::size_t end = 0;    // first byte after the ':'
};

std::vector<LabelHit> find_labels(std::string_view text, LabelAliases const& aliases = {});

/// Count of background headers each followed by a prevention header before
/// the next background header.
std::size_t count_label_pairs(std::vector<LabelHit> const& hits);

/// Numbered case headings such as "1. **薬剤の混同**", "事例2", "Case 3";
/// returns the count of distinct numbers.
std::size_t count_case_headings(std::string_view text);

using ParseResult = std::variant<ParsedAnswer, MalformedPattern>;

/// Extracts the two answer spans. Exactly one background header followed by
/// exactly one prevention header is required and both spans must be
/// non-blank; anything else is UnparseableFormat.
ParseResult parse_sections(std::string_view text, LabelAliases const& aliases = {});

/// Runs the detectors in order: AnswersAllExamples, AggregatedSummary,
/// Repetition, then parse_sections. The first two are skipped when
/// n_examples is 0.
ParseResult classify_outcome(std::string_view text, std::size_t n_examples, DetectorConfig const& config = {});

nlohmann::json to_json(ParseResult const& r);

}  // namespace tagshot
