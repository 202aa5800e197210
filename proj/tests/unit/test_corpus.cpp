#include <doctest.h>

#include <numeric>
#include <sstream>

#include "tagshot/corpus.hpp"
#include "tagshot/error.hpp"
#include "test_support.hpp"

using namespace tagshot;
using tagshot::testing::TempDir;

TEST_SUITE("corpus") {

TEST_CASE("category table has 18 entries whose counts sum to the tagged total") {
  CHECK(all_categories().size() == 18);
  // Hand-copied per-category counts of the reference dataset.
  std::size_t const table[] = {71, 438, 182, 114, 136, 134, 84, 133, 131, 121, 83, 71, 73, 23, 71, 60, 39, 53};
  std::size_t sum = 0;
  for (auto c : all_categories()) {
    CHECK(expected_count(c) == table[category_index(c)]);
    sum += expected_count(c);
  }
  CHECK(sum == 2017);
  CHECK(std::accumulate(std::begin(table), std::end(table), std::size_t{0}) == 2017);
}

TEST_CASE("normalize_tag resolves merged fine-grained labels") {
  CHECK(normalize_tag("Other Medications") == BroadCategory::Medications);
  CHECK(normalize_tag("Enema") == BroadCategory::DrainInsertionAndManagement);
  CHECK(normalize_tag("Dispensing") == BroadCategory::Dispensing);
  CHECK(normalize_tag("Nasogastric Tube") == BroadCategory::DrainInsertionAndManagement);
  CHECK(normalize_tag("Clinical Tests") == BroadCategory::LaboratoryTests);
  CHECK(normalize_tag("Laterality Error") == BroadCategory::LeftRightConfusion);
  CHECK(normalize_tag("調剤") == BroadCategory::Dispensing);
  CHECK_FALSE(normalize_tag("Something Else").has_value());
  CHECK_FALSE(normalize_tag("").has_value());
}

TEST_CASE("normalize_tag tolerates whitespace and is idempotent on canonical names") {
  CHECK(normalize_tag("  Other   Medications ") == BroadCategory::Medications);
  CHECK(normalize_tag("　Enema　") == BroadCategory::DrainInsertionAndManagement);
  for (auto c : all_categories()) {
    auto once = normalize_tag(category_name(c));
    REQUIRE(once.has_value());
    CHECK(*once == c);
    CHECK(normalize_tag(category_name(*once)) == once);
  }
}

TEST_CASE("label map extensions") {
  TempDir dir;
  tagshot::testing::write_file(dir / "labels.json", R"({"薬剤": "Medications", "輸液ポンプ": "Infusion Pumps"})");
  auto labels = LabelMap::with_extra_file((dir / "labels.json").string());
  CHECK(labels.lookup("薬剤") == BroadCategory::Medications);
  CHECK(labels.lookup("輸液ポンプ") == BroadCategory::InfusionPumps);

  LabelMap m;
  CHECK_THROWS_AS(m.add("x", "Not A Category"), ConfigError);
  CHECK_THROWS_AS(m.add("Enema", "Medications"), ConfigError);
  CHECK_NOTHROW(m.add("Enema", "Drain Insertion and Management"));
}

TEST_CASE("empty input gives an empty corpus") {
  std::istringstream in("");
  auto c = parse_corpus(in);
  CHECK(c.size() == 0);
  CHECK(c.tagged_count() == 0);
  auto hist = category_histogram(c);
  CHECK(hist.size() == 18);
  for (auto const& [cat, n] : hist) CHECK(n == 0);
}

TEST_CASE("fixture loads with categories and untagged records") {
  auto c = load_corpus(tagshot::testing::fixture20().string());
  CHECK(c.size() == 20);
  CHECK(c.tagged_count() == 18);
  CHECK(c.by_category(BroadCategory::Dispensing).size() == 9);
  CHECK(c.by_category(BroadCategory::Medications).size() == 9);
  auto summary = validation_summary(c);
  CHECK(summary["total"] == 20);
  CHECK(summary["tagged"] == 18);
  CHECK(summary["per_category_counts"]["Dispensing"] == 9);
  CHECK(summary["unknown_tags"].empty());
}

TEST_CASE("malformed lines report their line number") {
  std::string const text =
      "{\"id\":\"1\",\"details\":\"a\",\"background\":\"b\",\"prevention\":\"c\"}\n"
      "\n"
      "{not json}\n";
  std::istringstream in(text);
  try {
    parse_corpus(in);
    FAIL("expected CorpusError");
  } catch (CorpusError const& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("empty details and duplicate ids are rejected; lenient mode skips them") {
  std::string const text =
      "{\"id\":\"1\",\"details\":\"a\",\"background\":\"b\",\"prevention\":\"c\"}\n"
      "{\"id\":\"2\",\"details\":\"  \",\"background\":\"b\",\"prevention\":\"c\"}\n"
      "{\"id\":\"1\",\"details\":\"z\",\"background\":\"b\",\"prevention\":\"c\"}\n"
      "{\"id\":\"3\",\"details\":\"d\",\"background\":\"b\",\"prevention\":\"c\",\"tag\":\"Unheard Of\"}\n";
  {
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_corpus(in), CorpusError);
  }
  std::istringstream in(text);
  LoadOptions opts;
  opts.lenient = true;
  auto c = parse_corpus(in, opts);
  CHECK(c.size() == 2);
  CHECK(c.skipped_lines() == 2);
  CHECK(c.at("3").raw_tag == "Unheard Of");
  CHECK_FALSE(c.at("3").category.has_value());
  CHECK(c.unknown_tags().at("Unheard Of") == 1);
}

TEST_CASE("field map renames source keys and synthesizes missing ids") {
  std::string const text =
      "{\"事例の詳細\":\"詳細A\",\"背景・要因\":\"背景A\",\"改善策\":\"改善A\",\"分類\":[\"Other Medications\"]}\n"
      "{\"事例の詳細\":\"詳細B\",\"背景・要因\":\"背景B\",\"改善策\":\"改善B\",\"分類\":[\"?\",\"Enema\"]}\n";
  LoadOptions opts;
  opts.fields.details = "事例の詳細";
  opts.fields.background = "背景・要因";
  opts.fields.prevention = "改善策";
  opts.fields.tag = "分類";
  std::istringstream in(text);
  auto c = parse_corpus(in, opts);
  REQUIRE(c.size() == 2);
  CHECK(c.all_ids() == std::vector<std::string>{"0", "1"});
  CHECK(c.at("0").category == BroadCategory::Medications);
  CHECK(c.at("1").category == BroadCategory::DrainInsertionAndManagement);
  CHECK(c.at("1").raw_tag == "Enema");
}

TEST_CASE("record json round trip") {
  IncidentRecord r{"42", "詳細", "背景", "改善", std::string("Enema"), BroadCategory::DrainInsertionAndManagement};
  CHECK(record_from_json(record_to_json(r)) == r);
}

}  // TEST_SUITE
