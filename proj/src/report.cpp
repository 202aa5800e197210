#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tagshot/error.hpp"
#include "tagshot/runner.hpp"

namespace tagshot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json target_json(TargetScores const& t) {
  return json{{"bertscore", t.bertscore}, {"rouge1", t.rouge1}, {"rougel", t.rougel}};
}

TargetScores target_from(json const& j) {
  TargetScores t;
  t.bertscore = j.at("bertscore").get<PRF>();
  t.rouge1 = j.at("rouge1").get<PRF>();
  t.rougel = j.at("rougel").get<PRF>();
  return t;
}

std::string shortest(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string fixed3(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.3f", v);
  return buf.data();
}

std::string csv_field(std::string const& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string method_label(Strategy s) {
  switch (s) {
    case Strategy::ZeroShot: return "zero-shot";
    case Strategy::Random: return "random";
    case Strategy::Similarity: return "similarity";
    case Strategy::TagBased: return "tag-based";
  }
  return "unknown";
}

void append_prf(std::vector<std::string>& row, PRF const& p, std::string (*fmt)(double)) {
  row.push_back(fmt(p.precision));
  row.push_back(fmt(p.recall));
  row.push_back(fmt(p.f1));
}

std::vector<std::string> target_cells(TargetScores const& t, std::string (*fmt)(double)) {
  std::vector<std::string> row;
  append_prf(row, t.bertscore, fmt);
  append_prf(row, t.rouge1, fmt);
  append_prf(row, t.rougel, fmt);
  return row;
}

std::string md_row(std::vector<std::string> const& cells) {
  std::string out = "|";
  for (auto const& c : cells) out += " " + c + " |";
  return out + "\n";
}

}  // namespace

json to_json(RunReport const& r) {
  json strategies = json::array();
  for (auto const& s : r.strategies) {
    json counts = json::object();
    for (auto const& [status, n] : s.outcome_counts) counts[std::string(status_name(status))] = n;
    json cases = json::array();
    for (auto const& c : s.cases) cases.push_back(to_json(c));
    strategies.push_back({
        {"strategy", strategy_name(s.strategy)},
        {"aggregates", {{"background", target_json(s.aggregates.background)},
                        {"prevention", target_json(s.aggregates.prevention)}}},
        {"outcome_counts", counts},
        {"mean_similarity", s.mean_similarity ? json(*s.mean_similarity) : json(nullptr)},
        {"example_sets", s.example_sets},
        {"cases", cases},
    });
  }
  return json{{"config", r.config},
              {"model_ids", r.model_ids},
              {"eval_ids", r.eval_ids},
              {"excluded_ids", r.excluded_ids},
              {"strategies", strategies}};
}

RunReport run_report_from_json(json const& j) {
  RunReport r;
  try {
    r.config = j.at("config");
    r.model_ids = j.at("model_ids").get<std::map<std::string, std::string>>();
    r.eval_ids = j.at("eval_ids").get<std::vector<std::string>>();
    r.excluded_ids = j.at("excluded_ids").get<std::vector<std::string>>();
    for (auto const& sj : j.at("strategies")) {
      StrategyReport s;
      auto strategy = strategy_from_name(sj.at("strategy").get<std::string>());
      if (!strategy) throw Error("report: unknown strategy " + sj.at("strategy").dump());
      s.strategy = *strategy;
      s.aggregates.background = target_from(sj.at("aggregates").at("background"));
      s.aggregates.prevention = target_from(sj.at("aggregates").at("prevention"));
      for (auto const& [name, n] : sj.at("outcome_counts").items()) {
        auto status = status_from_name(name);
        if (!status) throw Error("report: unknown status " + name);
        s.outcome_counts[*status] = n.get<std::size_t>();
      }
      if (!sj.at("mean_similarity").is_null()) s.mean_similarity = sj["mean_similarity"].get<double>();
      s.example_sets = sj.at("example_sets");
      for (auto const& c : sj.at("cases")) s.cases.push_back(case_scores_from_json(c));
      r.strategies.push_back(std::move(s));
    }
  } catch (json::exception const& e) {
    throw Error(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_json(RunReport const& r) { return to_json(r).dump(2) + "\n"; }

std::string cases_csv(std::span<const CaseScores> cases) {
  std::string out = "input_id,strategy,status,malformed";
  for (char const* target : {"background", "prevention"}) {
    for (char const* metric : {"bertscore", "rouge1", "rougel"}) {
      for (char const* part : {"precision", "recall", "f1"}) {
        out += std::string(",") + target + "_" + metric + "_" + part;
      }
    }
  }
  out += "\n";
  for (auto const& c : cases) {
    std::vector<std::string> row{csv_field(c.input_id), std::string(strategy_name(c.strategy)),
                                 std::string(status_name(c.status)),
                                 c.malformed ? std::string(malformed_kind_name(*c.malformed)) : ""};
    for (auto const& cell : target_cells(c.background, shortest)) row.push_back(cell);
    for (auto const& cell : target_cells(c.prevention, shortest)) row.push_back(cell);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += "\n";
  }
  return out;
}

std::string report_csv(RunReport const& r) {
  std::vector<CaseScores> all;
  for (auto const& s : r.strategies) all.insert(all.end(), s.cases.begin(), s.cases.end());
  return cases_csv(all);
}

std::string report_markdown(RunReport const& r) {
  std::ostringstream md;
  auto model = [&](std::string const& key) {
    auto it = r.model_ids.find(key);
    return it == r.model_ids.end() || it->second.empty() ? std::string("n/a") : it->second;
  };
  std::string const llm = model("llm");

  md << "# Experiment report\n\n";
  md << "- LLM: `" << llm << "`\n";
  md << "- Sentence embedding: `" << model("sentence_embedding") << "`\n";
  md << "- Token embedding: `" << model("token_embedding") << "`\n";
  md << "- Evaluated inputs: " << r.eval_ids.size() << "\n";
  md << "- Excluded as fixed examples: " << r.excluded_ids.size() << "\n\n";

  std::vector<std::string> const header{"LLM (method)",  "BERTScore Prec.", "BERTScore Rec.", "BERTScore F1",
                                        "ROUGE-1 Prec.", "ROUGE-1 Rec.",    "ROUGE-1 F1",     "ROUGE-L Prec.",
                                        "ROUGE-L Rec.",  "ROUGE-L F1"};
  std::vector<std::string> rule{"---"};
  for (std::size_t i = 1; i < header.size(); ++i) rule.push_back("---:");

  auto table = [&](char const* title, TargetScores Aggregates::*target) {
    md << "## " << title << "\n\n" << md_row(header) << md_row(rule);
    for (auto const& s : r.strategies) {
      std::vector<std::string> row{llm + "(" + method_label(s.strategy) + ")"};
      for (auto const& cell : target_cells(s.aggregates.*target, fixed3)) row.push_back(cell);
      md << md_row(row);
    }
    md << "\n";
  };
  table("Background/causal factors", &Aggregates::background);
  table("Preventive measures", &Aggregates::prevention);

  md << "## Outcomes\n\n";
  md << md_row({"LLM (method)", "Ok", "Blocked", "Malformed", "TransportError"});
  md << md_row({"---", "---:", "---:", "---:", "---:"});
  for (auto const& s : r.strategies) {
    std::vector<std::string> row{llm + "(" + method_label(s.strategy) + ")"};
    for (auto st : {OutcomeStatus::Ok, OutcomeStatus::Blocked, OutcomeStatus::Malformed, OutcomeStatus::TransportError}) {
      auto it = s.outcome_counts.find(st);
      row.push_back(std::to_string(it == s.outcome_counts.end() ? 0 : it->second));
    }
    md << md_row(row);
  }
  md << "\n";

  bool any_similarity = false;
  for (auto const& s : r.strategies) any_similarity = any_similarity || s.mean_similarity.has_value();
  if (any_similarity) {
    md << "## Mean query-example cosine similarity\n\n";
    md << md_row({"Selection", "Mean cosine"}) << md_row({"---", "---:"});
    for (auto const& s : r.strategies) {
      if (s.mean_similarity) md << md_row({method_label(s.strategy), fixed3(*s.mean_similarity)});
    }
    md << "\n";
  }

  md << "## Configuration\n\n```json\n" << r.config.dump(2) << "\n```\n";
  return md.str();
}

fs::path export_report(RunReport const& r, ReportFormat format, fs::path const& dir) {
  fs::create_directories(dir);
  fs::path path;
  std::string content;
  switch (format) {
    case ReportFormat::Json:
      path = dir / layout::kReport;
      content = report_json(r);
      break;
    case ReportFormat::Csv:
      path = dir / layout::kCases;
      content = report_csv(r);
      break;
    case ReportFormat::Markdown:
      path = dir / layout::kMarkdown;
      content = report_markdown(r);
      break;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
  return path;
}

}  // namespace tagshot
