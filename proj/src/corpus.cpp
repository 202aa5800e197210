#include "tagshot/corpus.hpp"

#include <fstream>

#include "tagshot/error.hpp"
#include "tagshot/text.hpp"

namespace tagshot {

using nlohmann::json;

void to_json(json& j, FieldMap const& m) {
  j = json{{"id", m.id},
           {"details", m.details},
           {"background", m.background},
           {"prevention", m.prevention},
           {"tag", m.tag}};
}

void from_json(json const& j, FieldMap& m) {
  m.id = j.value("id", m.id);
  m.details = j.value("details", m.details);
  m.background = j.value("background", m.background);
  m.prevention = j.value("prevention", m.prevention);
  m.tag = j.value("tag", m.tag);
}

namespace {

std::optional<std::string> text_field(json const& obj, std::string const& key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw CorpusError("field '" + key + "' is not a string", line);
}

// A tag field may be a string or a list of strings. For lists the first entry
// that resolves wins; otherwise the first entry is kept as the raw tag.
std::optional<std::string> tag_field(json const& obj, std::string const& key,
                                     LabelMap const& labels, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (normalize_whitespace(s).empty()) return std::nullopt;
    return s;
  }
  if (it->is_array()) {
    std::optional<std::string> first;
    for (auto const& e : *it) {
      if (!e.is_string()) throw CorpusError("field '" + key + "' has a non-string element", line);
      auto s = e.get<std::string>();
      if (normalize_whitespace(s).empty()) continue;
      if (labels.lookup(s)) return s;
      if (!first) first = s;
    }
    return first;
  }
  throw CorpusError("field '" + key + "' is not a string or list", line);
}

}  // namespace

IncidentRecord const* Corpus::find(std::string const& id) const {
  auto it = pos_.find(id);
  return it == pos_.end() ? nullptr : &records_[it->second];
}

IncidentRecord const& Corpus::at(std::string const& id) const {
  if (auto const* r = find(id)) return *r;
  throw CorpusError("unknown record id '" + id + "'");
}

void Corpus::index_record(IncidentRecord record) {
  if (pos_.contains(record.id)) throw CorpusError("duplicate record id '" + record.id + "'");
  pos_.emplace(record.id, records_.size());
  all_ids_.push_back(record.id);
  if (record.category) {
    by_category_[category_index(*record.category)].push_back(record.id);
    ++tagged_;
  } else if (record.raw_tag) {
    ++unknown_tags_[normalize_whitespace(*record.raw_tag)];
  }
  records_.push_back(std::move(record));
}

Corpus Corpus::from_records(std::vector<IncidentRecord> records) {
  Corpus c;
  for (auto& r : records) {
    if (text::trim(r.details).empty()) throw CorpusError("record '" + r.id + "' has empty details");
    c.index_record(std::move(r));
  }
  return c;
}

json Corpus::to_json() const {
  json recs = json::array();
  for (auto const& r : records_) recs.push_back(record_to_json(r));
  return json{{"records", std::move(recs)}, {"skipped_lines", skipped_}};
}

Corpus parse_corpus(std::istream& in, LoadOptions const& opts) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    try {
      json obj;
      try {
        obj = json::parse(line);
      } catch (json::parse_error const& e) {
        throw CorpusError(std::string("invalid JSON: ") + e.what(), line_no);
      }
      if (!obj.is_object()) throw CorpusError("line is not a JSON object", line_no);

      IncidentRecord r;
      r.id = text_field(obj, opts.fields.id, line_no).value_or(std::to_string(line_no - 1));
      r.details = text_field(obj, opts.fields.details, line_no).value_or("");
      if (text::trim(r.details).empty()) throw CorpusError("empty '" + opts.fields.details + "'", line_no);
      r.background = text_field(obj, opts.fields.background, line_no).value_or("");
      r.prevention = text_field(obj, opts.fields.prevention, line_no).value_or("");
      r.raw_tag = tag_field(obj, opts.fields.tag, opts.labels, line_no);
      if (r.raw_tag) r.category = opts.labels.lookup(*r.raw_tag);
      try {
        corpus.index_record(std::move(r));
      } catch (CorpusError const& e) {
        throw CorpusError(e.what(), line_no);
      }
    } catch (CorpusError const&) {
      if (!opts.lenient) throw;
      ++corpus.skipped_;
    }
  }
  return corpus;
}

Corpus load_corpus(std::string const& path, LoadOptions const& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file " + path);
  return parse_corpus(in, opts);
}

std::map<BroadCategory, std::size_t> category_histogram(Corpus const& corpus) {
  std::map<BroadCategory, std::size_t> hist;
  for (auto c : all_categories()) hist[c] = corpus.by_category(c).size();
  return hist;
}

json validation_summary(Corpus const& corpus) {
  json per_category = json::object();
  for (auto const& [c, n] : category_histogram(corpus)) per_category[std::string(category_name(c))] = n;
  json unknown = json::array();
  for (auto const& [tag, n] : corpus.unknown_tags()) unknown.push_back({{"tag", tag}, {"count", n}});
  return json{{"total", corpus.size()},
              {"tagged", corpus.tagged_count()},
              {"per_category_counts", std::move(per_category)},
              {"unknown_tags", std::move(unknown)},
              {"skipped_lines", corpus.skipped_lines()}};
}

json record_to_json(IncidentRecord const& r) {
  json j{{"id", r.id}, {"details", r.details}, {"background", r.background}, {"prevention", r.prevention}};
  j["raw_tag"] = r.raw_tag ? json(*r.raw_tag) : json(nullptr);
  j["category"] = r.category ? json(std::string(category_name(*r.category))) : json(nullptr);
  return j;
}

IncidentRecord record_from_json(json const& j) {
  IncidentRecord r;
  r.id = j.at("id").get<std::string>();
  r.details = j.at("details").get<std::string>();
  r.background = j.value("background", "");
  r.prevention = j.value("prevention", "");
  if (j.contains("raw_tag") && !j["raw_tag"].is_null()) r.raw_tag = j["raw_tag"].get<std::string>();
  if (j.contains("category") && !j["category"].is_null()) {
    r.category = category_from_name(j["category"].get<std::string>());
    if (!r.category) throw CorpusError("unknown category '" + j["category"].get<std::string>() + "'");
  }
  return r;
}

}  // namespace tagshot
