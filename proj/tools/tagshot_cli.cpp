// tagshot: corpus checks, example selection, prompt rendering, experiment
// runs and offline scoring from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tagshot/corpus.hpp"
#include "tagshot/error.hpp"
#include "tagshot/output_validation.hpp"
#include "tagshot/prompting.hpp"
#include "tagshot/runner.hpp"
#include "tagshot/selection.hpp"

using namespace tagshot;
using nlohmann::json;

namespace {

std::string read_file(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flags that mirror ExperimentConfig. Only flags given on the command line
// override the --config file. Credentials never come from flags.
struct ConfigFlags {
  std::string config_file;
  ExperimentConfig raw;
  std::vector<std::string> strategies;
  std::string field_map_file;
  double bert_baseline = 0.0;
  std::size_t limit = 0;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;

  template <typename T>
  void add(CLI::App* app, std::string const& name, T& target, std::string const& help,
           std::function<void(ExperimentConfig&)> apply) {
    setters.emplace_back(app->add_option(name, target, help), std::move(apply));
  }
  void flag(CLI::App* app, std::string const& name, bool& target, std::string const& help,
            std::function<void(ExperimentConfig&)> apply) {
    setters.emplace_back(app->add_flag(name, target, help), std::move(apply));
  }

  void register_corpus(CLI::App* app) {
    app->add_option("--config", config_file, "Experiment config JSON")->check(CLI::ExistingFile);
    add(app, "--corpus", raw.corpus_path, "Corpus JSONL", [this](auto& c) { c.corpus_path = raw.corpus_path; });
    add(app, "--field-map", field_map_file, "JSON file mapping logical fields to source keys",
        [this](auto& c) { c.field_map = json::parse(read_file(field_map_file)).get<FieldMap>(); });
    add(app, "--label-map", raw.label_map_path, "Extra tag-to-category mapping JSON",
        [this](auto& c) { c.label_map_path = raw.label_map_path; });
    flag(app, "--lenient", raw.lenient, "Skip malformed lines instead of failing",
         [this](auto& c) { c.lenient = raw.lenient; });
  }

  void register_selection(CLI::App* app) {
    add(app, "-k,--shots", raw.k, "Examples per prompt", [this](auto& c) { c.k = raw.k; });
    add(app, "--seed", raw.seed, "Selection seed", [this](auto& c) { c.seed = raw.seed; });
    add(app, "--scorer", raw.scorer.kind, "Embedding backend: fake or http",
        [this](auto& c) { c.scorer.kind = raw.scorer.kind; });
    add(app, "--scorer-url", raw.scorer.endpoint.base_url, "Scorer service base URL",
        [this](auto& c) { c.scorer.endpoint.base_url = raw.scorer.endpoint.base_url; });
    add(app, "--sentence-model", raw.scorer.endpoint.sentence_model, "Sentence embedding model id",
        [this](auto& c) { c.scorer.endpoint.sentence_model = raw.scorer.endpoint.sentence_model; });
    add(app, "--token-model", raw.scorer.endpoint.token_model, "Token embedding model id",
        [this](auto& c) { c.scorer.endpoint.token_model = raw.scorer.endpoint.token_model; });
    add(app, "--embedding-cache", raw.scorer.cache_dir, "Directory for the embedding cache",
        [this](auto& c) { c.scorer.cache_dir = raw.scorer.cache_dir; });
    add(app, "--fake-dim", raw.scorer.fake_dim, "Dimension of the fake embedder",
        [this](auto& c) { c.scorer.fake_dim = raw.scorer.fake_dim; });
    add(app, "--template", raw.prompt_template, "Prompt template: ja, en or a JSON path",
        [this](auto& c) { c.prompt_template = raw.prompt_template; });
  }

  void register_run(CLI::App* app) {
    add(app, "--strategy", strategies, "Strategies to run (repeatable)", [this](auto& c) {
      c.strategies.clear();
      for (auto const& s : strategies) {
        auto parsed = strategy_from_name(s);
        if (!parsed) throw ConfigError("unknown strategy '" + s + "'");
        c.strategies.push_back(*parsed);
      }
    });
    add(app, "--llm", raw.llm.kind, "Provider: http or mock", [this](auto& c) { c.llm.kind = raw.llm.kind; });
    add(app, "--llm-url", raw.llm.endpoint.base_url, "Chat completions base URL",
        [this](auto& c) { c.llm.endpoint.base_url = raw.llm.endpoint.base_url; });
    add(app, "--api-key-env", raw.llm.endpoint.api_key_env, "Environment variable holding the API key",
        [this](auto& c) { c.llm.endpoint.api_key_env = raw.llm.endpoint.api_key_env; });
    add(app, "--model", raw.llm.model, "Model name", [this](auto& c) { c.llm.model = raw.llm.model; });
    add(app, "--temperature", raw.llm.temperature, "Sampling temperature",
        [this](auto& c) { c.llm.temperature = raw.llm.temperature; });
    add(app, "--mock-mode", raw.llm.mock_mode, "Mock fallback: echo, reference or blocked",
        [this](auto& c) { c.llm.mock_mode = raw.llm.mock_mode; });
    add(app, "--mock-script", raw.llm.mock_script, "Mock script JSON keyed by request hash",
        [this](auto& c) { c.llm.mock_script = raw.llm.mock_script; });
    add(app, "--tokenization", raw.tokenization, "ROUGE tokenization: character or whitespace",
        [this](auto& c) { c.tokenization = raw.tokenization; });
    flag(app, "--idf", raw.bertscore.idf, "IDF-weighted BERTScore", [this](auto& c) { c.bertscore.idf = raw.bertscore.idf; });
    add(app, "--bertscore-baseline", bert_baseline, "BERTScore baseline for rescaling",
        [this](auto& c) { c.bertscore.baseline = bert_baseline; });
    add(app, "--repetition-threshold", raw.detectors.repetition_threshold, "Repetition detector threshold",
        [this](auto& c) { c.detectors.repetition_threshold = raw.detectors.repetition_threshold; });
    flag(app, "--all-records", raw.evaluation.all_records, "Evaluate untagged records too",
         [this](auto& c) { c.evaluation.all_records = raw.evaluation.all_records; });
    flag(app, "--tag-fallback-random", raw.evaluation.tag_fallback_random,
         "Use the random set for tag-based inputs without a usable category",
         [this](auto& c) { c.evaluation.tag_fallback_random = raw.evaluation.tag_fallback_random; });
    add(app, "--limit", limit, "Evaluate at most N inputs", [this](auto& c) { c.evaluation.limit = limit; });
    add(app, "-o,--output-dir", raw.output_dir, "Run directory", [this](auto& c) { c.output_dir = raw.output_dir; });
    add(app, "-j,--parallelism", raw.parallelism, "Concurrent cases", [this](auto& c) { c.parallelism = raw.parallelism; });
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config_file.empty()) c = experiment_config_from_json(json::parse(read_file(config_file)));
    for (auto const& [opt, apply] : setters) {
      if (opt->count() > 0) apply(c);
    }
    if (c.corpus_path.empty()) throw ConfigError("no corpus given (--corpus or corpus.path in --config)");
    return c;
  }
};

Corpus load(ExperimentConfig const& c) {
  LoadOptions opts;
  opts.fields = c.field_map;
  opts.lenient = c.lenient;
  if (!c.label_map_path.empty()) opts.labels = LabelMap::with_extra_file(c.label_map_path);
  return load_corpus(c.corpus_path, opts);
}

ExampleSet select_one(ExperimentConfig const& c, Corpus const& corpus, Strategy s, IncidentRecord const& input) {
  switch (s) {
    case Strategy::ZeroShot: return zero_shot(input.id);
    case Strategy::Random: return select_random(corpus, c.k, c.seed);
    case Strategy::Similarity: {
      std::unique_ptr<SentenceEmbedder> embedder;
      if (c.scorer.kind == "http") {
        embedder = std::make_unique<HttpScorerClient>(c.scorer.endpoint);
      } else {
        embedder = std::make_unique<HashedNgramEmbedder>(c.scorer.fake_dim);
      }
      std::optional<EmbeddingCache> cache;
      if (!c.scorer.cache_dir.empty()) cache.emplace(c.scorer.cache_dir, embedder->model_id());
      auto index = EmbeddingIndex::build(corpus, *embedder, cache ? &*cache : nullptr, {c.scorer.batch_size, c.parallelism});
      return select_similar(corpus, input, c.k, index);
    }
    case Strategy::TagBased: {
      if (!input.category) throw SelectionError("input '" + input.id + "' has no broad category");
      SelectionCache cache;
      return select_tag_based(corpus, *input.category, c.k, c.seed, cache);
    }
  }
  throw Error("unreachable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot example selection experiments over incident reports"};
  app.require_subcommand(1);

  // validate
  ConfigFlags validate_flags;
  auto* validate = app.add_subcommand("validate", "Check a corpus and print a JSON summary");
  validate_flags.register_corpus(validate);
  bool show_expected = false;
  validate->add_flag("--expected", show_expected, "Include reference per-category counts");

  // select
  ConfigFlags select_flags;
  std::string select_input;
  std::string select_strategy = "tag_based";
  auto* select = app.add_subcommand("select", "Print the examples chosen for one input as JSON");
  select_flags.register_corpus(select);
  select_flags.register_selection(select);
  select->add_option("--input", select_input, "Input record id")->required();
  select->add_option("--strategy", select_strategy, "zero_shot, random, similarity or tag_based");

  // render
  ConfigFlags render_flags;
  std::string render_input;
  std::string render_strategy = "tag_based";
  auto* render = app.add_subcommand("render", "Print the prompt for one input");
  render_flags.register_corpus(render);
  render_flags.register_selection(render);
  render->add_option("--input", render_input, "Input record id")->required();
  render->add_option("--strategy", render_strategy, "zero_shot, random, similarity or tag_based");

  // run
  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Run an experiment and write the run directory");
  run_flags.register_corpus(run);
  run_flags.register_selection(run);
  run_flags.register_run(run);

  // score
  ConfigFlags score_flags;
  std::string score_log;
  std::string score_out;
  auto* score = app.add_subcommand("score", "Re-score a response log offline and print per-case CSV");
  score_flags.register_corpus(score);
  score_flags.register_selection(score);
  score_flags.register_run(score);
  score->add_option("--log", score_log, "responses.jsonl to score")->required()->check(CLI::ExistingFile);
  score->add_option("--out", score_out, "Write CSV here instead of stdout");

  // report
  std::string report_in;
  std::string report_format = "all";
  std::string report_out;
  auto* report = app.add_subcommand("report", "Re-export a report.json");
  report->add_option("report", report_in, "report.json or a run directory")->required();
  report->add_option("--format", report_format, "json, csv, markdown or all")
      ->check(CLI::IsMember({"json", "csv", "markdown", "all"}));
  report->add_option("--out", report_out, "Output directory (default: alongside the input)");

  // classify
  std::string classify_file;
  std::size_t classify_examples = 0;
  std::string classify_detectors;
  auto* classify_cmd = app.add_subcommand("classify", "Classify one completion and print status and evidence");
  classify_cmd->add_option("file", classify_file, "Completion text file")->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("-n,--n-examples", classify_examples, "Examples shown in the prompt");
  classify_cmd->add_option("--detectors", classify_detectors, "Detector config JSON")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      auto cfg = validate_flags.resolve();
      auto corpus = load(cfg);
      auto summary = validation_summary(corpus);
      if (show_expected) {
        json expected = json::object();
        for (auto c : all_categories()) expected[std::string(category_name(c))] = expected_count(c);
        summary["expected_counts"] = expected;
      }
      std::cout << summary.dump(2) << "\n";
    } else if (*select || *render) {
      auto const& flags = *select ? select_flags : render_flags;
      auto const& input_id = *select ? select_input : render_input;
      auto const& strategy_text = *select ? select_strategy : render_strategy;
      auto cfg = flags.resolve();
      auto strategy = strategy_from_name(strategy_text);
      if (!strategy) throw ConfigError("unknown strategy '" + strategy_text + "'");
      auto corpus = load(cfg);
      auto const& input = corpus.at(input_id);
      auto set = select_one(cfg, corpus, *strategy, input);
      if (*select) {
        std::cout << to_json(set).dump(2) << "\n";
      } else {
        auto tmpl = PromptTemplate::resolve(cfg.prompt_template);
        auto prompt = *strategy == Strategy::ZeroShot ? render_zeroshot(input, tmpl) : render_fewshot(set, input, tmpl);
        for (auto const& w : prompt.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << prompt.text << "\n";
      }
    } else if (*run) {
      auto cfg = run_flags.resolve();
      auto r = run_experiment(cfg);
      std::cout << report_markdown(r);
      std::cerr << "wrote " << cfg.output_dir << "\n";
    } else if (*score) {
      auto cfg = score_flags.resolve();
      auto csv = cases_csv(rescore_log(cfg, score_log));
      if (score_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(score_out, std::ios::binary) << csv;
      }
    } else if (*report) {
      std::filesystem::path in = report_in;
      if (std::filesystem::is_directory(in)) in /= layout::kReport;
      auto r = run_report_from_json(json::parse(read_file(in.string())));
      std::filesystem::path dir = report_out.empty() ? in.parent_path() : std::filesystem::path(report_out);
      if (dir.empty()) dir = ".";
      auto emit = [&](ReportFormat f) { std::cerr << "wrote " << export_report(r, f, dir).string() << "\n"; };
      if (report_format == "json" || report_format == "all") emit(ReportFormat::Json);
      if (report_format == "csv" || report_format == "all") emit(ReportFormat::Csv);
      if (report_format == "markdown" || report_format == "all") emit(ReportFormat::Markdown);
    } else if (*classify_cmd) {
      DetectorConfig detectors;
      if (!classify_detectors.empty()) detectors = json::parse(read_file(classify_detectors)).get<DetectorConfig>();
      auto result = classify_outcome(read_file(classify_file), classify_examples, detectors);
      json out = to_json(result);
      out["n_examples"] = classify_examples;
      std::cout << out.dump(2) << "\n";
    }
  } catch (CorpusError const& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (ConfigError const& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
