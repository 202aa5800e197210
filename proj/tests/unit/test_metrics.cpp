#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "tagshot/error.hpp"
#include "tagshot/metrics.hpp"
#include "test_support.hpp"

using namespace tagshot;

namespace {

TokenSequence seq(std::vector<std::string> t) { return {std::move(t), "character"}; }

TokenEmbedding toy(std::vector<std::vector<double>> vectors) {
  TokenEmbedding te;
  te.model_id = "toy";
  for (std::size_t i = 0; i < vectors.size(); ++i) te.tokens.push_back("t" + std::to_string(i));
  te.vectors = std::move(vectors);
  te.special_mask.assign(te.tokens.size(), false);
  return te;
}

void check_zero(TargetScores const& t) {
  for (auto const* p : {&t.rouge1, &t.rougel, &t.bertscore}) {
    CHECK(p->precision == 0.0);
    CHECK(p->recall == 0.0);
    CHECK(p->f1 == 0.0);
  }
}

IncidentRecord reference() {
  IncidentRecord r;
  r.id = "7";
  r.details = "詳細";
  r.background = "確認が不十分だった。";
  r.prevention = "ダブルチェックを徹底する。";
  return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("PRF harmonic mean with zero rule") {
  auto p = PRF::from(1.0, 0.6);
  CHECK(p.f1 == doctest::Approx(0.75));
  CHECK(PRF::from(0.0, 0.0).f1 == 0.0);
}

TEST_CASE("tokenizers") {
  CharacterTokenizer ch;
  CHECK(ch.tokenize("薬 剤　ＡＢ").tokens == std::vector<std::string>{"薬", "剤", "A", "B"});
  WhitespaceTokenizer ws;
  CHECK(ws.tokenize(" a  b　c ").tokens == std::vector<std::string>{"a", "b", "c"});
  CHECK(make_tokenizer("character")->mode() == "character");
  CHECK_THROWS_AS(make_tokenizer("mecab"), ConfigError);
}

TEST_CASE("ROUGE-1 hand examples") {
  auto r = rouge_n(seq({"a", "b"}), seq({"a", "b", "c"}), 1);
  CHECK(r.precision == 1.0);
  CHECK(std::abs(r.recall - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(r.f1 - 0.8) < 1e-12);

  auto same = rouge_n(seq({"x", "y", "x"}), seq({"x", "y", "x"}), 1);
  CHECK(same == PRF{1.0, 1.0, 1.0});

  // Clipping: the candidate repeats "a" three times, the reference once.
  auto clip = rouge_n(seq({"a", "a", "a"}), seq({"a", "b"}), 1);
  CHECK(std::abs(clip.precision - 1.0 / 3.0) < 1e-12);
  CHECK(clip.recall == 0.5);

  CHECK(rouge_n(seq({}), seq({"a"}), 1) == PRF{});
  CHECK_THROWS_AS(rouge_n(seq({"a"}), seq({"a"}), 0), MetricError);
  CHECK_THROWS_AS(rouge_n(seq({"a"}), TokenSequence{{"a"}, "whitespace"}, 1), MetricError);
}

TEST_CASE("ROUGE-2 keeps token boundaries") {
  auto r = rouge_n(seq({"ab", "c"}), seq({"a", "bc"}), 2);
  CHECK(r == PRF{});
  auto s = rouge_n(seq({"a", "b", "c"}), seq({"a", "b", "d"}), 2);
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
}

TEST_CASE("ROUGE-L hand examples") {
  auto r = rouge_l(seq({"a", "c", "e"}), seq({"a", "b", "c", "d", "e"}));
  CHECK(r.precision == 1.0);
  CHECK(std::abs(r.recall - 0.6) < 1e-12);
  CHECK(std::abs(r.f1 - 0.75) < 1e-12);
  CHECK(rouge_l(seq({"x", "y"}), seq({"a", "b"})) == PRF{});
  std::vector<std::string> a{"a", "b", "c", "b", "d", "a", "b"};
  std::vector<std::string> b{"b", "d", "c", "a", "b", "a"};
  CHECK(lcs_length(a, b) == 4);
}

TEST_CASE("ROUGE swap duality and bounds on random pairs") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::string> a(rng() % 10);
    std::vector<std::string> b(rng() % 10);
    for (auto& x : a) x = std::string(1, static_cast<char>('a' + rng() % 4));
    for (auto& x : b) x = std::string(1, static_cast<char>('a' + rng() % 4));
    for (std::size_t n : {1u, 2u}) {
      auto ab = rouge_n(seq(a), seq(b), n);
      auto ba = rouge_n(seq(b), seq(a), n);
      CHECK(ab.precision == ba.recall);
      CHECK(ab.recall == ba.precision);
      CHECK(ab.f1 >= 0.0);
      CHECK(ab.f1 <= 1.0);
    }
    auto l = rouge_l(seq(a), seq(b));
    auto lr = rouge_l(seq(b), seq(a));
    CHECK(l.precision == lr.recall);
    CHECK(l.f1 <= 1.0);
    CHECK(l.f1 <= rouge_n(seq(a), seq(b), 1).f1 + 1e-12);
  }
}

TEST_CASE("BERTScore toy example and identity") {
  auto cand = toy({{1.0, 0.0}});
  auto ref = toy({{1.0, 0.0}, {0.0, 1.0}});
  auto s = bert_score(cand, ref);
  CHECK(s.precision == doctest::Approx(1.0));
  CHECK(s.recall == doctest::Approx(0.5));
  CHECK(std::abs(s.f1 - 2.0 / 3.0) < 1e-12);

  HashedNgramEmbedder e(64);
  auto self = bert_score("確認が不十分だった。", "確認が不十分だった。", e);
  CHECK(std::abs(self.f1 - 1.0) < 1e-6);
}

TEST_CASE("BERTScore equals a brute-force row/column maximum") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    std::size_t const m = 1 + rng() % 6;
    std::size_t const n = 1 + rng() % 6;
    std::vector<std::vector<double>> a(m, std::vector<double>(3));
    std::vector<std::vector<double>> b(n, std::vector<double>(3));
    for (auto& v : a)
      for (auto& x : v) x = std::abs(g(rng));
    for (auto& v : b)
      for (auto& x : v) x = std::abs(g(rng));
    auto cosv = [](std::vector<double> const& u, std::vector<double> const& v) {
      double d = 0, nu = 0, nv = 0;
      for (int i = 0; i < 3; ++i) {
        d += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
      }
      return d / std::sqrt(nu * nv);
    };
    double p = 0, r = 0;
    for (auto const& u : a) {
      double best = -1;
      for (auto const& v : b) best = std::max(best, cosv(u, v));
      p += best;
    }
    for (auto const& v : b) {
      double best = -1;
      for (auto const& u : a) best = std::max(best, cosv(u, v));
      r += best;
    }
    p /= m;
    r /= n;
    BertScoreOptions serial;
    serial.use_parallel_kernels = false;
    auto got = bert_score(toy(a), toy(b), serial);
    CHECK(got.precision == doctest::Approx(p).epsilon(1e-12));
    CHECK(got.recall == doctest::Approx(r).epsilon(1e-12));
    CHECK(got == bert_score(toy(a), toy(b)));
  }
}

TEST_CASE("BERTScore drops special tokens, idf and baseline") {
  auto cand = toy({{9.0, 9.0}, {1.0, 0.0}});
  cand.special_mask[0] = true;
  auto ref = toy({{1.0, 0.0}});
  CHECK(bert_score(cand, ref).f1 == doctest::Approx(1.0));

  auto all_special = toy({{1.0, 0.0}});
  all_special.special_mask[0] = true;
  CHECK_THROWS_AS(bert_score(all_special, ref), MetricError);

  auto idf = IdfWeights::build({{"a", "b"}, {"a"}});
  CHECK(idf.weight("a") == doctest::Approx(std::log(3.0 / 3.0)));
  CHECK(idf.weight("b") == doctest::Approx(std::log(3.0 / 2.0)));
  CHECK(idf.weight("zzz") == doctest::Approx(std::log(3.0)));

  BertScoreOptions rescaled;
  rescaled.baseline = 0.5;
  auto s = bert_score(toy({{1.0, 0.0}}), toy({{1.0, 0.0}, {0.0, 1.0}}), rescaled);
  CHECK(s.recall == doctest::Approx(0.0));
  CHECK(s.precision == doctest::Approx(1.0));
}

TEST_CASE("score_case: zero rule for every non-Ok status") {
  CharacterTokenizer tok;
  HashedNgramEmbedder emb(32);
  ScoringContext ctx{tok, emb, {}};
  for (auto status : {OutcomeStatus::Blocked, OutcomeStatus::Malformed, OutcomeStatus::TransportError}) {
    ClassifiedOutcome c;
    c.status = status;
    if (status == OutcomeStatus::Malformed) c.malformed = MalformedPattern{MalformedKind::AggregatedSummary, "x"};
    auto s = score_case(c, reference(), ctx);
    CHECK(s.status == status);
    check_zero(s.background);
    check_zero(s.prevention);
  }
}

TEST_CASE("score_case: perfect answer and classify") {
  CharacterTokenizer tok;
  HashedNgramEmbedder emb(32);
  ScoringContext ctx{tok, emb, {}};
  auto const ref = reference();
  auto c = classify(GenerationOutcome::ok("背景・要因: " + ref.background + "\n改善策: " + ref.prevention), 5);
  REQUIRE(c.status == OutcomeStatus::Ok);
  auto s = score_case(c, ref, ctx);
  CHECK(s.background.rouge1.f1 == 1.0);
  CHECK(s.background.rougel.f1 == 1.0);
  CHECK(s.prevention.rouge1.f1 == 1.0);
  CHECK(std::abs(s.prevention.bertscore.f1 - 1.0) < 1e-6);

  auto blocked = classify(GenerationOutcome::blocked("content_filter"), 5);
  CHECK(blocked.status == OutcomeStatus::Blocked);
  auto malformed = classify(GenerationOutcome::ok("no labels"), 5);
  CHECK(malformed.status == OutcomeStatus::Malformed);
  CHECK(malformed.malformed->kind == MalformedKind::UnparseableFormat);

  auto blank_ref = ref;
  blank_ref.prevention = "";
  auto z = score_case(c, blank_ref, ctx);
  check_zero(z.prevention);
  CHECK(z.background.rouge1.f1 == 1.0);
}

TEST_CASE("case scores json round trip") {
  CaseScores c;
  c.input_id = "12";
  c.strategy = Strategy::TagBased;
  c.status = OutcomeStatus::Malformed;
  c.malformed = MalformedKind::Repetition;
  c.reason = "why";
  c.background.rouge1 = PRF::from(0.1, 0.3);
  c.prevention.bertscore = PRF::from(0.123456789012345, 0.9);
  c.example_ids = {"1", "2"};
  CHECK(case_scores_from_json(to_json(c)) == c);
}

}  // TEST_SUITE
