#include <doctest.h>

#include "tagshot/error.hpp"
#include "tagshot/prompting.hpp"
#include "test_support.hpp"

using namespace tagshot;

namespace {

IncidentRecord rec(std::string id, std::string details, std::string bg, std::string pv) {
  IncidentRecord r;
  r.id = std::move(id);
  r.details = std::move(details);
  r.background = std::move(bg);
  r.prevention = std::move(pv);
  return r;
}

ExampleSet examples(std::size_t k) {
  ExampleSet s;
  s.strategy = Strategy::Random;
  for (std::size_t i = 0; i < k; ++i) {
    auto n = std::to_string(i);
    s.examples.push_back(rec(n, "詳細" + n, "背景" + n, "改善" + n));
  }
  return s;
}

IncidentRecord const kInput = rec("in", "入力の詳細", "正解の背景", "正解の改善");

}  // namespace

TEST_SUITE("prompting") {

TEST_CASE("five examples give six detail blocks and one empty answer pair") {
  for (auto const& tmpl : {PromptTemplate::japanese(), PromptTemplate::english()}) {
    auto p = render_fewshot(examples(5), kInput, tmpl);
    CHECK(p.n_examples == 5);
    CHECK(p.input_id == "in");
    CHECK(count_label_lines(p.text, tmpl.label_details) == 6);
    CHECK(count_label_lines(p.text, tmpl.label_background) == 6);
    CHECK(count_label_lines(p.text, tmpl.label_prevention) == 6);
    std::string const tail = "\n" + tmpl.label_background + ":\n" + tmpl.label_prevention + ":";
    CHECK(p.text.ends_with(tail));
    CHECK(p.text.find(kInput.background) == std::string::npos);
    CHECK(p.text.find(kInput.prevention) == std::string::npos);
  }
  auto en = render_fewshot(examples(5), kInput, PromptTemplate::english());
  CHECK(count_label_lines(en.text, "Specifics") == 6);
}

TEST_CASE("one example gives two blocks; output is deterministic") {
  auto p = render_fewshot(examples(1), kInput);
  CHECK(count_label_lines(p.text, "具体的内容") == 2);
  CHECK(render_fewshot(examples(1), kInput).text == p.text);
}

TEST_CASE("example fields are embedded verbatim in set order") {
  auto s = examples(3);
  s.examples[1].background = "複数行の\n背景: コロン入り";
  auto p = render_fewshot(s, kInput);
  CHECK(p.text.find("背景・要因: 複数行の\n背景: コロン入り\n") != std::string::npos);
  auto p0 = p.text.find("詳細0");
  auto p1 = p.text.find("詳細1");
  auto p2 = p.text.find("詳細2");
  CHECK(p0 < p1);
  CHECK(p1 < p2);
  auto const expected_start = PromptTemplate::japanese().instruction_fewshot + "\n具体的内容: 詳細0\n背景・要因: 背景0\n改善策: 改善0\n";
  CHECK(p.text.starts_with(expected_start));
}

TEST_CASE("zero-shot prompt has one block and no examples") {
  auto p = render_zeroshot(kInput);
  CHECK(p.n_examples == 0);
  CHECK(count_label_lines(p.text, "具体的内容") == 1);
  CHECK(p.text == PromptTemplate::japanese().instruction_zeroshot + "\n具体的内容: 入力の詳細\n背景・要因:\n改善策:");
  CHECK(render_zeroshot(kInput).text == p.text);
}

TEST_CASE("render errors and warnings") {
  CHECK_THROWS_AS(render_fewshot(zero_shot(), kInput), PromptError);
  ExampleSet empty;
  empty.strategy = Strategy::Random;
  CHECK_THROWS_AS(render_fewshot(empty, kInput), PromptError);
  CHECK_THROWS_AS(render_zeroshot(rec("x", "  ", "", "")), PromptError);
  auto s = examples(2);
  s.examples[0].prevention = "";
  auto p = render_fewshot(s, kInput);
  CHECK(p.warnings.size() == 1);
}

TEST_CASE("template assets match the built-ins") {
  std::string const dir = TAGSHOT_ASSET_DIR;
  CHECK(PromptTemplate::load(dir + "/templates/ja-v1.json") == PromptTemplate::japanese());
  CHECK(PromptTemplate::load(dir + "/templates/en-v1.json") == PromptTemplate::english());
  CHECK(PromptTemplate::resolve("ja") == PromptTemplate::japanese());
  CHECK_THROWS_AS(PromptTemplate::resolve("/nonexistent/template.json"), PromptError);
}

}  // TEST_SUITE
