#include "tagshot/output_validation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "tagshot/error.hpp"
#include "tagshot/text.hpp"

namespace tagshot {

using nlohmann::json;

std::string_view malformed_kind_name(MalformedKind k) {
  switch (k) {
    case MalformedKind::AnswersAllExamples: return "AnswersAllExamples";
    case MalformedKind::AggregatedSummary: return "AggregatedSummary";
    case MalformedKind::Repetition: return "Repetition";
    case MalformedKind::UnparseableFormat: return "UnparseableFormat";
  }
  return "Unknown";
}

void to_json(json& j, DetectorConfig const& c) {
  j = json{{"repetition_threshold", c.repetition_threshold},
           {"repetition_ngram", c.repetition_ngram},
           {"aliases", {{"version", c.aliases.version}, {"background", c.aliases.background}, {"prevention", c.aliases.prevention}}}};
}

void from_json(json const& j, DetectorConfig& c) {
  c.repetition_threshold = j.value("repetition_threshold", c.repetition_threshold);
  c.repetition_ngram = j.value("repetition_ngram", c.repetition_ngram);
  if (c.repetition_ngram == 0) throw ConfigError("repetition_ngram must be positive");
  if (auto a = j.find("aliases"); a != j.end()) {
    c.aliases.version = a->value("version", c.aliases.version);
    c.aliases.background = a->value("background", c.aliases.background);
    c.aliases.prevention = a->value("prevention", c.aliases.prevention);
  }
}

namespace {

constexpr std::string_view kFullWidthColon = "\xEF\xBC\x9A";  // ：

bool is_ascii(std::string_view s) {
  return std::ranges::all_of(s, [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool matches_at(std::string_view text, std::size_t pos, std::string_view alias, bool fold) {
  if (pos + alias.size() > text.size()) return false;
  auto window = text.substr(pos, alias.size());
  return fold ? text::ascii_iequals(window, alias) : window == alias;
}

// Leading decoration that may precede a header on its line.
std::size_t walk_back_decoration(std::string_view text, std::size_t pos) {
  static constexpr std::array<std::string_view, 5> kGlyphs{"\xE3\x83\xBB", "\xE2\x80\xA2", "\xE2\x97\x8F", "\xE2\x96\xA0", "\xE3\x80\x90"};
  for (;;) {
    if (pos == 0) return pos;
    char c = text[pos - 1];
    if (c == '*' || c == '-' || c == '#' || c == '>' || c == ' ' || c == '\t') {
      --pos;
      continue;
    }
    bool glyph = false;
    for (auto g : kGlyphs) {
      if (pos >= g.size() && text.substr(pos - g.size(), g.size()) == g) {
        pos -= g.size();
        glyph = true;
        break;
      }
    }
    if (!glyph) return pos;
  }
}

// Returns the end of the header (after ':' and optional closing "**"), or
// npos when no colon follows the alias.
std::size_t header_end(std::string_view text, std::size_t pos) {
  if (text.substr(pos, 2) == "**") pos += 2;
  if (text.substr(pos, 3) == "\xE3\x80\x91") pos += 3;  // 】
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  if (pos < text.size() && text[pos] == ':') {
    ++pos;
  } else if (text.substr(pos, kFullWidthColon.size()) == kFullWidthColon) {
    pos += kFullWidthColon.size();
  } else {
    return std::string_view::npos;
  }
  if (text.substr(pos, 2) == "**") pos += 2;
  return pos;
}

std::string snippet(std::string_view text, std::size_t pos, std::size_t max_bytes = 160) {
  pos = std::min(pos, text.size());
  while (pos > 0 && pos < text.size() && (static_cast<unsigned char>(text[pos]) & 0xC0) == 0x80) --pos;
  return text::utf8_prefix(text.substr(pos), max_bytes);
}

std::string trim_span(std::string_view s) {
  std::string t = text::trim(s);
  // Ideographic spaces around a span are layout, not content.
  constexpr std::string_view kIdeo = "\xE3\x80\x80";
  std::string_view v = t;
  while (v.starts_with(kIdeo)) v.remove_prefix(kIdeo.size());
  while (v.ends_with(kIdeo)) v.remove_suffix(kIdeo.size());
  return text::trim(v);
}

bool parse_number(std::string_view line, std::size_t& pos, int& value) {
  std::size_t start = pos;
  value = 0;
  for (;;) {
    if (pos < line.size() && line[pos] >= '0' && line[pos] <= '9') {
      value = value * 10 + (line[pos] - '0');
      ++pos;
      continue;
    }
    // Full-width digits U+FF10..U+FF19: EF BC 90..99
    if (pos + 2 < line.size() && line.substr(pos, 2) == "\xEF\xBC") {
      auto b = static_cast<unsigned char>(line[pos + 2]);
      if (b >= 0x90 && b <= 0x99) {
        value = value * 10 + (b - 0x90);
        pos += 3;
        continue;
      }
    }
    break;
  }
  return pos > start && value < 1000;
}

}  // namespace

std::vector<LabelHit> find_labels(std::string_view text, LabelAliases const& aliases) {
  struct Candidate {
    std::size_t alias_pos;
    std::size_t alias_len;
    LabelHit hit;
  };
  std::vector<Candidate> found;
  auto scan = [&](std::vector<std::string> const& list, LabelHit::Section section) {
    for (auto const& alias : list) {
      if (alias.empty()) continue;
      bool const fold = is_ascii(alias);
      for (std::size_t pos = 0; pos + alias.size() <= text.size(); ++pos) {
        if (!matches_at(text, pos, alias, fold)) continue;
        auto end = header_end(text, pos + alias.size());
        if (end == std::string_view::npos) continue;
        found.push_back({pos, alias.size(), {section, walk_back_decoration(text, pos), end}});
      }
    }
  };
  scan(aliases.background, LabelHit::Section::Background);
  scan(aliases.prevention, LabelHit::Section::Prevention);

  // One hit per position; a longer alias wins over a shorter one it contains.
  std::ranges::sort(found, [](auto const& a, auto const& b) {
    if (a.alias_pos != b.alias_pos) return a.alias_pos < b.alias_pos;
    return a.alias_len > b.alias_len;
  });
  std::vector<LabelHit> hits;
  std::size_t covered_until = 0;
  for (auto const& c : found) {
    if (!hits.empty() && c.alias_pos < covered_until) continue;
    hits.push_back(c.hit);
    covered_until = c.alias_pos + c.alias_len;
  }
  return hits;
}

std::size_t count_label_pairs(std::vector<LabelHit> const& hits) {
  std::size_t pairs = 0;
  bool open = false;
  for (auto const& h : hits) {
    if (h.section == LabelHit::Section::Background) {
      open = true;
    } else if (open) {
      ++pairs;
      open = false;
    }
  }
  return pairs;
}

std::size_t count_case_headings(std::string_view text) {
  static constexpr std::array<std::string_view, 6> kCaseWords{"事例", "ケース", "症例", "Case", "case", "CASE"};
  std::set<int> numbers;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    auto nl = text.find('\n', line_start);
    auto line = text.substr(line_start, nl == std::string_view::npos ? std::string_view::npos : nl - line_start);

    std::size_t p = 0;
    bool hashed = false;
    while (p < line.size() && (line[p] == ' ' || line[p] == '\t' || line[p] == '#' || line[p] == '*')) {
      hashed = hashed || line[p] == '#';
      ++p;
    }
    int value = 0;
    std::size_t q = p;
    if (parse_number(line, q, value)) {
      auto rest = line.substr(q);
      bool marker = false;
      for (std::string_view m : {".", ")", "\xEF\xBC\x8E", "\xEF\xBC\x89", "\xE3\x80\x81"}) {
        if (rest.starts_with(m)) {
          rest.remove_prefix(m.size());
          marker = true;
          break;
        }
      }
      while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
      if (marker && (hashed || rest.starts_with("**") || rest.starts_with("\xE3\x80\x90"))) numbers.insert(value);
    } else {
      for (auto w : kCaseWords) {
        if (line.substr(p).starts_with(w)) {
          std::size_t r = p + w.size();
          while (r < line.size() && line[r] == ' ') ++r;
          if (parse_number(line, r, value)) numbers.insert(value);
          break;
        }
      }
    }
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  return numbers.size();
}

ParseResult parse_sections(std::string_view text, LabelAliases const& aliases) {
  auto hits = find_labels(text, aliases);
  std::vector<LabelHit> bg;
  std::vector<LabelHit> pv;
  for (auto const& h : hits) (h.section == LabelHit::Section::Background ? bg : pv).push_back(h);

  if (bg.size() != 1 || pv.size() != 1) {
    std::string why = "expected one background and one prevention header, found " + std::to_string(bg.size()) + " and " +
                      std::to_string(pv.size());
    auto at = hits.empty() ? 0 : hits.front().begin;
    return MalformedPattern{MalformedKind::UnparseableFormat, why + ": " + snippet(text, at)};
  }
  if (bg.front().end > pv.front().begin) {
    return MalformedPattern{MalformedKind::UnparseableFormat, "prevention header precedes background: " + snippet(text, pv.front().begin)};
  }
  ParsedAnswer a{trim_span(text.substr(bg.front().end, pv.front().begin - bg.front().end)), trim_span(text.substr(pv.front().end))};
  if (a.background.empty()) {
    return MalformedPattern{MalformedKind::UnparseableFormat, "empty background span: " + snippet(text, bg.front().begin)};
  }
  if (a.prevention.empty()) {
    return MalformedPattern{MalformedKind::UnparseableFormat, "empty prevention span: " + snippet(text, pv.front().begin)};
  }
  return a;
}

ParseResult classify_outcome(std::string_view text, std::size_t n_examples, DetectorConfig const& config) {
  if (text::trim(text).empty()) return MalformedPattern{MalformedKind::UnparseableFormat, "empty completion"};

  auto const hits = find_labels(text, config.aliases);
  auto const pairs = count_label_pairs(hits);

  if (n_examples > 0) {
    if (pairs >= n_examples) {
      return MalformedPattern{MalformedKind::AnswersAllExamples,
                              std::to_string(pairs) + " answer pairs for " + std::to_string(n_examples) +
                                  " examples: " + snippet(text, hits.front().begin)};
    }
    auto const headings = count_case_headings(text);
    if (headings >= n_examples && pairs == 0) {
      return MalformedPattern{MalformedKind::AggregatedSummary,
                              std::to_string(headings) + " numbered case headings, no answer pair: " + snippet(text, 0)};
    }
  }

  {
    std::vector<std::string> tokens;
    for (auto& cp : text::code_points(text::nfkc(text))) {
      std::size_t pos = 0;
      if (!text::is_unicode_space(text::decode_utf8(cp, pos))) tokens.push_back(std::move(cp));
    }
    std::size_t const n = config.repetition_ngram;
    std::unordered_map<std::string, std::size_t> counts;
    std::string worst;
    std::size_t worst_count = 0;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram;
      for (std::size_t k = 0; k < n; ++k) gram += tokens[i + k];
      auto c = ++counts[gram];
      if (c > worst_count) {
        worst_count = c;
        worst = gram;
      }
    }
    if (worst_count > config.repetition_threshold) {
      return MalformedPattern{MalformedKind::Repetition, "\"" + worst + "\" repeated " + std::to_string(worst_count) + " times"};
    }
  }

  return parse_sections(text, config.aliases);
}

json to_json(ParseResult const& r) {
  if (auto const* a = std::get_if<ParsedAnswer>(&r)) {
    return json{{"status", "Ok"}, {"background", a->background}, {"prevention", a->prevention}};
  }
  auto const& m = std::get<MalformedPattern>(r);
  return json{{"status", "Malformed"}, {"kind", malformed_kind_name(m.kind)}, {"evidence", m.evidence}};
}

}  // namespace tagshot
