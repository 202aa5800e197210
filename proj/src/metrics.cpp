#include "tagshot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tagshot/error.hpp"
#include "tagshot/kernels.hpp"
#include "tagshot/text.hpp"

namespace tagshot {

using nlohmann::json;

PRF PRF::from(double precision, double recall) {
  double const sum = precision + recall;
  return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
}

void to_json(json& j, PRF const& p) { j = json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

void from_json(json const& j, PRF& p) {
  p.precision = j.at("precision").get<double>();
  p.recall = j.at("recall").get<double>();
  p.f1 = j.at("f1").get<double>();
}

// ---------------------------------------------------------------------------
// Tokenizers

TokenSequence CharacterTokenizer::tokenize(std::string_view in) const {
  TokenSequence seq{{}, mode()};
  for (auto& cp : text::code_points(text::nfkc(in))) {
    std::size_t pos = 0;
    if (text::is_unicode_space(text::decode_utf8(cp, pos))) continue;
    seq.tokens.push_back(std::move(cp));
  }
  return seq;
}

TokenSequence WhitespaceTokenizer::tokenize(std::string_view in) const {
  TokenSequence seq{{}, mode()};
  std::string current;
  for (auto& cp : text::code_points(text::nfkc(in))) {
    std::size_t pos = 0;
    if (text::is_unicode_space(text::decode_utf8(cp, pos))) {
      if (!current.empty()) seq.tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += cp;
    }
  }
  if (!current.empty()) seq.tokens.push_back(std::move(current));
  return seq;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string const& mode) {
  if (mode == "character") return std::make_unique<CharacterTokenizer>();
  if (mode == "whitespace") return std::make_unique<WhitespaceTokenizer>();
  throw ConfigError("unknown tokenization mode '" + mode + "'");
}

// ---------------------------------------------------------------------------
// ROUGE

namespace {

void require_same_mode(TokenSequence const& a, TokenSequence const& b) {
  if (a.mode != b.mode) throw MetricError("tokenization mode mismatch: '" + a.mode + "' vs '" + b.mode + "'");
}

std::map<std::string, std::size_t> ngram_counts(std::vector<std::string> const& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      key += std::to_string(tokens[i + k].size());
      key += ':';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PRF rouge_n(TokenSequence const& candidate, TokenSequence const& reference, std::size_t n) {
  require_same_mode(candidate, reference);
  if (n == 0) throw MetricError("ROUGE-N needs n >= 1");
  auto const cand = ngram_counts(candidate.tokens, n);
  auto const ref = ngram_counts(reference.tokens, n);
  std::size_t overlap = 0;
  for (auto const& [gram, c] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(c, it->second);
  }
  auto total = [n](std::vector<std::string> const& t) { return t.size() >= n ? t.size() - n + 1 : 0; };
  return PRF::from(ratio(overlap, total(candidate.tokens)), ratio(overlap, total(reference.tokens)));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PRF rouge_l(TokenSequence const& candidate, TokenSequence const& reference) {
  require_same_mode(candidate, reference);
  auto const l = lcs_length(candidate.tokens, reference.tokens);
  return PRF::from(ratio(l, candidate.tokens.size()), ratio(l, reference.tokens.size()));
}

// ---------------------------------------------------------------------------
// BERTScore

double IdfWeights::weight(std::string const& token) const {
  if (auto it = table.find(token); it != table.end()) return it->second;
  return std::log(static_cast<double>(documents) + 1.0);
}

IdfWeights IdfWeights::build(std::vector<std::vector<std::string>> const& docs) {
  std::unordered_map<std::string, std::size_t> df;
  for (auto const& d : docs) {
    std::vector<std::string> uniq(d.begin(), d.end());
    std::ranges::sort(uniq);
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto const& t : uniq) ++df[t];
  }
  IdfWeights w;
  w.documents = docs.size();
  double const m = static_cast<double>(docs.size());
  for (auto const& [t, c] : df) w.table[t] = std::log((m + 1.0) / (static_cast<double>(c) + 1.0));
  return w;
}

void to_json(json& j, BertScoreOptions const& o) {
  j = json{{"idf", o.idf}, {"baseline", o.baseline ? json(*o.baseline) : json(nullptr)}};
}

void from_json(json const& j, BertScoreOptions& o) {
  o.idf = j.value("idf", false);
  if (j.contains("baseline") && !j["baseline"].is_null()) o.baseline = j["baseline"].get<double>();
}

namespace {

std::vector<double> flatten(TokenEmbedding const& te, std::size_t& dim) {
  std::vector<double> flat;
  for (auto const& v : te.vectors) {
    if (dim == 0) dim = v.size();
    if (v.size() != dim || dim == 0) throw MetricError("token vectors disagree on dimension");
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

}  // namespace

PRF bert_score(TokenEmbedding const& candidate, TokenEmbedding const& reference, BertScoreOptions const& opts,
               IdfWeights const* idf) {
  auto const cand = candidate.content_only();
  auto const ref = reference.content_only();
  if (cand.tokens.empty() || ref.tokens.empty()) throw MetricError("BERTScore: no content tokens after stripping specials");

  std::size_t dim = 0;
  auto const a = flatten(cand, dim);
  auto const b = flatten(ref, dim);
  std::size_t const m = cand.tokens.size();
  std::size_t const n = ref.tokens.size();
  std::vector<double> sim(m * n);
  kernels::RowsView av{a, dim};
  kernels::RowsView bv{b, dim};

  std::vector<double> wr;
  std::vector<double> wc;
  if (opts.idf) {
    if (idf == nullptr) throw MetricError("BERTScore: idf enabled but no idf table supplied");
    for (auto const& t : cand.tokens) wr.push_back(idf->weight(t));
    for (auto const& t : ref.tokens) wc.push_back(idf->weight(t));
  }

  kernels::GreedyMatch g;
  if (opts.use_parallel_kernels) {
    kernels::parallel::cosine_matrix(av, bv, sim);
    g = kernels::parallel::greedy_match(sim, m, n, wr, wc);
  } else {
    kernels::serial::cosine_matrix(av, bv, sim);
    g = kernels::serial::greedy_match(sim, m, n, wr, wc);
  }
  auto p = PRF::from(g.precision, g.recall);
  if (opts.baseline) {
    double const base = *opts.baseline;
    auto rescale = [base](double x) { return (x - base) / (1.0 - base); };
    p = {rescale(p.precision), rescale(p.recall), rescale(p.f1)};
  }
  auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
  return {clamp01(p.precision), clamp01(p.recall), clamp01(p.f1)};
}

PRF bert_score(std::string const& candidate, std::string const& reference, TokenEmbedder& scorer,
               BertScoreOptions const& opts, IdfWeights const* idf) {
  if (text::trim(candidate).empty() || text::trim(reference).empty()) throw MetricError("BERTScore: empty text");
  return bert_score(scorer.token_embed(candidate), scorer.token_embed(reference), opts, idf);
}

// ---------------------------------------------------------------------------
// Case scoring

namespace {

json target_json(TargetScores const& t) {
  return json{{"rouge1", t.rouge1}, {"rougel", t.rougel}, {"bertscore", t.bertscore}};
}

TargetScores target_from_json(json const& j) {
  return {j.at("rouge1").get<PRF>(), j.at("rougel").get<PRF>(), j.at("bertscore").get<PRF>()};
}

}  // namespace

json to_json(CaseScores const& c) {
  json j{{"input_id", c.input_id}, {"strategy", strategy_name(c.strategy)}, {"status", status_name(c.status)}};
  j["malformed"] = c.malformed ? json(malformed_kind_name(*c.malformed)) : json(nullptr);
  j["reason"] = c.reason ? json(*c.reason) : json(nullptr);
  j["background"] = target_json(c.background);
  j["prevention"] = target_json(c.prevention);
  j["example_ids"] = c.example_ids;
  return j;
}

CaseScores case_scores_from_json(json const& j) {
  CaseScores c;
  c.input_id = j.at("input_id").get<std::string>();
  c.strategy = strategy_from_name(j.at("strategy").get<std::string>()).value();
  c.status = status_from_name(j.at("status").get<std::string>()).value();
  if (!j.at("malformed").is_null()) {
    auto name = j["malformed"].get<std::string>();
    for (auto k : {MalformedKind::AnswersAllExamples, MalformedKind::AggregatedSummary, MalformedKind::Repetition,
                   MalformedKind::UnparseableFormat}) {
      if (malformed_kind_name(k) == name) c.malformed = k;
    }
  }
  if (!j.at("reason").is_null()) c.reason = j["reason"].get<std::string>();
  c.background = target_from_json(j.at("background"));
  c.prevention = target_from_json(j.at("prevention"));
  c.example_ids = j.value("example_ids", std::vector<std::string>{});
  return c;
}

ClassifiedOutcome classify(GenerationOutcome const& outcome, std::size_t n_examples, DetectorConfig const& config) {
  ClassifiedOutcome c;
  c.status = outcome.status;
  c.reason = outcome.reason;
  if (outcome.status != OutcomeStatus::Ok) return c;
  auto result = classify_outcome(outcome.text.value_or(""), n_examples, config);
  if (auto* a = std::get_if<ParsedAnswer>(&result)) {
    c.answer = std::move(*a);
  } else {
    c.status = OutcomeStatus::Malformed;
    c.malformed = std::get<MalformedPattern>(result);
    c.reason = c.malformed->evidence;
  }
  return c;
}

namespace {

TargetScores score_target(std::string const& candidate, std::string const& reference, ScoringContext const& ctx,
                          IdfWeights const* idf) {
  if (text::trim(reference).empty()) return {};
  auto const c = ctx.tokenizer.tokenize(candidate);
  auto const r = ctx.tokenizer.tokenize(reference);
  TargetScores t;
  t.rouge1 = rouge_n(c, r, 1);
  t.rougel = rouge_l(c, r);
  t.bertscore = bert_score(candidate, reference, ctx.token_embedder, ctx.bertscore, idf);
  return t;
}

}  // namespace

CaseScores score_case(ClassifiedOutcome const& outcome, IncidentRecord const& reference, ScoringContext const& ctx) {
  CaseScores s;
  s.input_id = reference.id;
  s.status = outcome.status;
  s.reason = outcome.reason;
  if (outcome.malformed) s.malformed = outcome.malformed->kind;
  if (outcome.status != OutcomeStatus::Ok || !outcome.answer) return s;
  s.background = score_target(outcome.answer->background, reference.background, ctx, ctx.idf_background);
  s.prevention = score_target(outcome.answer->prevention, reference.prevention, ctx, ctx.idf_prevention);
  return s;
}

}  // namespace tagshot
