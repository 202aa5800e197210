#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagshot/categories.hpp"

namespace tagshot {

struct IncidentRecord {
  std::string id;
  std::string details;     // incident description; never blank
  std::string background;  // reference background/causal factors
  std::string prevention;  // reference preventive measures
  std::optional<std::string> raw_tag;
  std::optional<BroadCategory> category;

  bool operator==(IncidentRecord const&) const = default;
};

/// Source-key names for the canonical record fields.
struct FieldMap {
  std::string id = "id";
  std::string details = "details";
  std::string background = "background";
  std::string prevention = "prevention";
  std::string tag = "tag";

  bool operator==(FieldMap const&) const = default;
};

void to_json(nlohmann::json& j, FieldMap const& m);
void from_json(nlohmann::json const& j, FieldMap& m);

struct LoadOptions {
  FieldMap fields;
  LabelMap labels;
  /// Skip malformed lines (counted) instead of aborting.
  bool lenient = false;
};

/// Immutable, indexed incident corpus.
class Corpus {
 public:
  Corpus() = default;

  std::vector<IncidentRecord> const& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Ids in load order.
  std::vector<std::string> const& all_ids() const { return all_ids_; }

  IncidentRecord const* find(std::string const& id) const;
  IncidentRecord const& at(std::string const& id) const;

  /// Ids of records in `c`, load order.
  std::vector<std::string> const& by_category(BroadCategory c) const {
    return by_category_[category_index(c)];
  }

  std::size_t tagged_count() const { return tagged_; }
  std::size_t skipped_lines() const { return skipped_; }

  /// Raw tags that did not resolve, with their occurrence counts.
  std::map<std::string, std::size_t> const& unknown_tags() const { return unknown_tags_; }

  nlohmann::json to_json() const;

  static Corpus from_records(std::vector<IncidentRecord> records);

 private:
  friend Corpus parse_corpus(std::istream&, LoadOptions const&);

  void index_record(IncidentRecord record);

  std::vector<IncidentRecord> records_;
  std::vector<std::string> all_ids_;
  std::unordered_map<std::string, std::size_t> pos_;
  std::array<std::vector<std::string>, kCategoryCount> by_category_;
  std::map<std::string, std::size_t> unknown_tags_;
  std::size_t tagged_ = 0;
  std::size_t skipped_ = 0;
};

/// Reads JSONL records. Throws CorpusError with the line number on the first
/// bad line unless `opts.lenient`.
Corpus parse_corpus(std::istream& in, LoadOptions const& opts = {});
Corpus load_corpus(std::string const& path, LoadOptions const& opts = {});

/// Record counts per broad category; all 18 keys are present.
std::map<BroadCategory, std::size_t> category_histogram(Corpus const& corpus);

/// {total, tagged, per_category_counts, unknown_tags[], skipped_lines}
nlohmann::json validation_summary(Corpus const& corpus);

nlohmann::json record_to_json(IncidentRecord const& r);
IncidentRecord record_from_json(nlohmann::json const& j);

}  // namespace tagshot
