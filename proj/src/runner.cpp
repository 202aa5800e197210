#include "tagshot/runner.hpp"

#include <fstream>
#include <set>

#include "tagshot/error.hpp"
#include "tagshot/prompting.hpp"
#include "tagshot/rng.hpp"
#include "tagshot/text.hpp"
#include "tagshot/workers.hpp"

namespace tagshot {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config serialization

namespace {

json retry_json(RetryPolicy const& r) {
  return json{{"max_attempts", r.max_attempts},
              {"base_delay_ms", r.base_delay.count()},
              {"max_delay_ms", r.max_delay.count()}};
}

RetryPolicy retry_from(json const& j, RetryPolicy r) {
  r.max_attempts = j.value("max_attempts", r.max_attempts);
  r.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", r.base_delay.count()));
  r.max_delay = std::chrono::milliseconds(j.value("max_delay_ms", r.max_delay.count()));
  return r;
}

template <typename T>
json opt_json(std::optional<T> const& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(json const& j, char const* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

json to_json(ExperimentConfig const& c) {
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(strategy_name(s));
  return json{
      {"corpus", {{"path", c.corpus_path}, {"field_map", c.field_map}, {"label_map", c.label_map_path}, {"lenient", c.lenient}}},
      {"strategies", strategies},
      {"k", c.k},
      {"seed", c.seed},
      {"rng", kRngAlgorithm},
      {"llm",
       {{"kind", c.llm.kind},
        {"base_url", c.llm.endpoint.base_url},
        {"path", c.llm.endpoint.path},
        {"api_key_env", c.llm.endpoint.api_key_env},
        {"timeout_s", c.llm.endpoint.timeout.count()},
        {"retry", retry_json(c.llm.endpoint.retry)},
        {"model", c.llm.model},
        {"temperature", c.llm.temperature},
        {"max_tokens", opt_json(c.llm.max_tokens)},
        {"mock_mode", c.llm.mock_mode},
        {"mock_script", c.llm.mock_script}}},
      {"scorer",
       {{"kind", c.scorer.kind},
        {"base_url", c.scorer.endpoint.base_url},
        {"sentence_model", c.scorer.endpoint.sentence_model},
        {"token_model", c.scorer.endpoint.token_model},
        {"timeout_s", c.scorer.endpoint.timeout.count()},
        {"retry", retry_json(c.scorer.endpoint.retry)},
        {"cache_dir", c.scorer.cache_dir},
        {"fake_dim", c.scorer.fake_dim},
        {"batch_size", c.scorer.batch_size}}},
      {"tokenization", c.tokenization},
      {"bertscore", c.bertscore},
      {"detectors", c.detectors},
      {"prompt_template", c.prompt_template},
      {"evaluation",
       {{"all_records", c.evaluation.all_records},
        {"tag_fallback_random", c.evaluation.tag_fallback_random},
        {"limit", opt_json(c.evaluation.limit)}}},
      {"output_dir", c.output_dir},
      {"parallelism", c.parallelism},
      {"compute_mean_similarity", c.compute_mean_similarity},
  };
}

ExperimentConfig experiment_config_from_json(json const& j) {
  ExperimentConfig c;
  try {
    if (auto it = j.find("corpus"); it != j.end()) {
      c.corpus_path = it->value("path", c.corpus_path);
      if (it->contains("field_map")) c.field_map = (*it)["field_map"].get<FieldMap>();
      c.label_map_path = it->value("label_map", c.label_map_path);
      c.lenient = it->value("lenient", c.lenient);
    }
    if (auto it = j.find("strategies"); it != j.end()) {
      c.strategies.clear();
      for (auto const& s : *it) {
        auto parsed = strategy_from_name(s.get<std::string>());
        if (!parsed) throw ConfigError("unknown strategy '" + s.get<std::string>() + "'");
        c.strategies.push_back(*parsed);
      }
    }
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    if (auto it = j.find("llm"); it != j.end()) {
      auto const& l = *it;
      c.llm.kind = l.value("kind", c.llm.kind);
      c.llm.endpoint.base_url = l.value("base_url", c.llm.endpoint.base_url);
      c.llm.endpoint.path = l.value("path", c.llm.endpoint.path);
      c.llm.endpoint.api_key_env = l.value("api_key_env", c.llm.endpoint.api_key_env);
      c.llm.endpoint.timeout = std::chrono::seconds(l.value("timeout_s", c.llm.endpoint.timeout.count()));
      if (l.contains("retry")) c.llm.endpoint.retry = retry_from(l["retry"], c.llm.endpoint.retry);
      c.llm.model = l.value("model", c.llm.model);
      c.llm.temperature = l.value("temperature", c.llm.temperature);
      c.llm.max_tokens = opt_from<int>(l, "max_tokens");
      c.llm.mock_mode = l.value("mock_mode", c.llm.mock_mode);
      c.llm.mock_script = l.value("mock_script", c.llm.mock_script);
    }
    if (auto it = j.find("scorer"); it != j.end()) {
      auto const& s = *it;
      c.scorer.kind = s.value("kind", c.scorer.kind);
      c.scorer.endpoint.base_url = s.value("base_url", c.scorer.endpoint.base_url);
      c.scorer.endpoint.sentence_model = s.value("sentence_model", c.scorer.endpoint.sentence_model);
      c.scorer.endpoint.token_model = s.value("token_model", c.scorer.endpoint.token_model);
      c.scorer.endpoint.timeout = std::chrono::seconds(s.value("timeout_s", c.scorer.endpoint.timeout.count()));
      if (s.contains("retry")) c.scorer.endpoint.retry = retry_from(s["retry"], c.scorer.endpoint.retry);
      c.scorer.cache_dir = s.value("cache_dir", c.scorer.cache_dir);
      c.scorer.fake_dim = s.value("fake_dim", c.scorer.fake_dim);
      c.scorer.batch_size = s.value("batch_size", c.scorer.batch_size);
    }
    c.tokenization = j.value("tokenization", c.tokenization);
    if (j.contains("bertscore")) c.bertscore = j["bertscore"].get<BertScoreOptions>();
    if (j.contains("detectors")) c.detectors = j["detectors"].get<DetectorConfig>();
    c.prompt_template = j.value("prompt_template", c.prompt_template);
    if (auto it = j.find("evaluation"); it != j.end()) {
      c.evaluation.all_records = it->value("all_records", c.evaluation.all_records);
      c.evaluation.tag_fallback_random = it->value("tag_fallback_random", c.evaluation.tag_fallback_random);
      c.evaluation.limit = opt_from<std::size_t>(*it, "limit");
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.compute_mean_similarity = j.value("compute_mean_similarity", c.compute_mean_similarity);
  } catch (json::exception const& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (c.k == 0) throw ConfigError("k must be positive");
  if (c.strategies.empty()) throw ConfigError("no strategies configured");
  return c;
}

json config_snapshot(ExperimentConfig const& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return j;
}

// ---------------------------------------------------------------------------
// Aggregation

Aggregates aggregate(std::span<const CaseScores> cases) {
  if (cases.empty()) throw Error("aggregate: no cases");
  Aggregates sum;
  auto add = [](PRF& acc, PRF const& x) {
    acc.precision += x.precision;
    acc.recall += x.recall;
    acc.f1 += x.f1;
  };
  auto add_target = [&](TargetScores& acc, TargetScores const& x) {
    add(acc.rouge1, x.rouge1);
    add(acc.rougel, x.rougel);
    add(acc.bertscore, x.bertscore);
  };
  for (auto const& c : cases) {
    add_target(sum.background, c.background);
    add_target(sum.prevention, c.prevention);
  }
  double const n = static_cast<double>(cases.size());
  auto div = [n](PRF& p) {
    p.precision /= n;
    p.recall /= n;
    p.f1 /= n;
  };
  for (auto* t : {&sum.background, &sum.prevention}) {
    div(t->rouge1);
    div(t->rougel);
    div(t->bertscore);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Providers

std::shared_ptr<Provider> make_provider(ExperimentConfig const& cfg, Corpus const& corpus) {
  if (cfg.llm.kind == "http") return std::make_shared<ChatCompletionsProvider>(cfg.llm.endpoint);
  if (cfg.llm.kind != "mock") throw ConfigError("unknown llm kind '" + cfg.llm.kind + "'");

  std::map<std::string, GenerationOutcome> script;
  if (!cfg.llm.mock_script.empty()) script = MockProvider::load_script(cfg.llm.mock_script);

  MockProvider::Fallback fallback;
  if (cfg.llm.mock_mode == "echo") {
    fallback = MockProvider::echo();
  } else if (cfg.llm.mock_mode == "blocked") {
    fallback = MockProvider::always(GenerationOutcome::blocked("content_filter"));
  } else if (cfg.llm.mock_mode == "reference") {
    auto const tmpl = PromptTemplate::resolve(cfg.prompt_template);
    auto answers = std::make_shared<std::map<std::string, std::string>>();
    for (auto const& r : corpus.records()) {
      (*answers)[r.id] = tmpl.label_background + ": " + r.background + "\n" + tmpl.label_prevention + ": " + r.prevention;
    }
    fallback = [answers](GenerationRequest const& req) {
      auto it = answers->find(req.prompt.input_id);
      if (it == answers->end()) return GenerationOutcome::ok(req.prompt.text);
      return GenerationOutcome::ok(it->second);
    };
  } else {
    throw ConfigError("unknown mock_mode '" + cfg.llm.mock_mode + "'");
  }
  return std::make_shared<MockProvider>(std::move(script), std::move(fallback));
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

void write_text(fs::path const& path, std::string const& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

Corpus load_for(ExperimentConfig const& cfg) {
  LoadOptions opts;
  opts.fields = cfg.field_map;
  opts.lenient = cfg.lenient;
  if (!cfg.label_map_path.empty()) opts.labels = LabelMap::with_extra_file(cfg.label_map_path);
  return load_corpus(cfg.corpus_path, opts);
}

struct Embedders {
  std::shared_ptr<SentenceEmbedder> sentence;
  std::shared_ptr<TokenEmbedder> token;
};

Embedders make_embedders(ExperimentConfig const& cfg, RunHooks const& hooks) {
  Embedders e{hooks.sentence_embedder, hooks.token_embedder};
  if (e.sentence && e.token) return e;
  if (cfg.scorer.kind == "fake") {
    auto fake = std::make_shared<HashedNgramEmbedder>(cfg.scorer.fake_dim);
    if (!e.sentence) e.sentence = fake;
    if (!e.token) e.token = fake;
  } else if (cfg.scorer.kind == "http") {
    auto client = std::make_shared<HttpScorerClient>(cfg.scorer.endpoint);
    if (!e.sentence) e.sentence = client;
    if (!e.token) e.token = client;
  } else {
    throw ConfigError("unknown scorer kind '" + cfg.scorer.kind + "'");
  }
  return e;
}

std::map<OutcomeStatus, std::size_t> empty_counts() {
  return {{OutcomeStatus::Ok, 0}, {OutcomeStatus::Blocked, 0}, {OutcomeStatus::Malformed, 0}, {OutcomeStatus::TransportError, 0}};
}

}  // namespace

RunReport run_experiment(ExperimentConfig const& cfg, RunHooks const& hooks) {
  if (cfg.k == 0) throw ConfigError("k must be positive");
  if (cfg.strategies.empty()) throw ConfigError("no strategies configured");
  fs::path const out = cfg.output_dir;
  fs::create_directories(out);
  write_text(out / layout::kConfig, to_json(cfg).dump(2) + "\n");
  write_text(out / layout::kIncomplete, "run started; resume by re-running with the same config\n");

  auto uses = [&](Strategy s) { return std::ranges::find(cfg.strategies, s) != cfg.strategies.end(); };

  Corpus const corpus = load_for(cfg);
  auto const tmpl = PromptTemplate::resolve(cfg.prompt_template);
  auto const tokenizer = make_tokenizer(cfg.tokenization);
  auto const embedders = make_embedders(cfg, hooks);

  bool const any_fewshot = uses(Strategy::Random) || uses(Strategy::Similarity) || uses(Strategy::TagBased);
  bool const need_index = uses(Strategy::Similarity) || (cfg.compute_mean_similarity && any_fewshot);
  EmbeddingIndex index;
  if (need_index) {
    std::optional<EmbeddingCache> cache;
    if (!cfg.scorer.cache_dir.empty()) cache.emplace(cfg.scorer.cache_dir, embedders.sentence->model_id());
    index = EmbeddingIndex::build(corpus, *embedders.sentence, cache ? &*cache : nullptr,
                                  {cfg.scorer.batch_size, cfg.parallelism});
  }

  // Random and tag-based sets are drawn once, before any input is seen.
  bool const need_random = uses(Strategy::Random) || (uses(Strategy::TagBased) && cfg.evaluation.tag_fallback_random);
  std::optional<ExampleSet> random_set;
  if (need_random) random_set = select_random(corpus, cfg.k, cfg.seed);
  SelectionCache tag_cache;
  if (uses(Strategy::TagBased)) {
    for (auto c : all_categories()) {
      if (corpus.by_category(c).size() >= cfg.k) select_tag_based(corpus, c, cfg.k, cfg.seed, tag_cache);
    }
  }

  std::set<std::string> excluded;
  if (random_set) {
    for (auto const& id : random_set->ids()) excluded.insert(id);
  }
  for (auto c : all_categories()) {
    if (auto s = tag_cache.find(c)) {
      for (auto const& id : s->ids()) excluded.insert(id);
    }
  }

  RunReport report;
  report.config = config_snapshot(cfg);
  for (auto const& id : corpus.all_ids()) {
    if (excluded.contains(id)) continue;
    if (!cfg.evaluation.all_records && !corpus.at(id).category) continue;
    report.eval_ids.push_back(id);
  }
  if (cfg.evaluation.limit && report.eval_ids.size() > *cfg.evaluation.limit) report.eval_ids.resize(*cfg.evaluation.limit);
  if (report.eval_ids.empty()) throw Error("no evaluation inputs remain after excluding fixed examples");
  for (auto const& id : corpus.all_ids()) {
    if (excluded.contains(id)) report.excluded_ids.push_back(id);
  }

  if (uses(Strategy::TagBased) && !cfg.evaluation.tag_fallback_random) {
    for (auto const& id : report.eval_ids) {
      auto const& rec = corpus.at(id);
      if (!rec.category) throw SelectionError("tag-based selection for untagged input '" + id + "'");
      if (!tag_cache.find(*rec.category)) {
        throw SelectionError("category '" + std::string(category_name(*rec.category)) + "' has fewer than " +
                             std::to_string(cfg.k) + " records (input '" + id + "')");
      }
    }
  }

  auto const provider = hooks.provider ? hooks.provider : make_provider(cfg, corpus);
  ResponseLog log(out / layout::kResponses);
  Gateway gateway(provider, &log);

  std::optional<IdfWeights> idf_bg;
  std::optional<IdfWeights> idf_pv;
  if (cfg.bertscore.idf) {
    std::vector<std::vector<std::string>> bg_docs;
    std::vector<std::vector<std::string>> pv_docs;
    for (auto const& id : report.eval_ids) {
      auto const& rec = corpus.at(id);
      if (!text::trim(rec.background).empty()) bg_docs.push_back(embedders.token->token_embed(rec.background).content_only().tokens);
      if (!text::trim(rec.prevention).empty()) pv_docs.push_back(embedders.token->token_embed(rec.prevention).content_only().tokens);
    }
    idf_bg = IdfWeights::build(bg_docs);
    idf_pv = IdfWeights::build(pv_docs);
  }
  ScoringContext const ctx{*tokenizer, *embedders.token, cfg.bertscore, idf_bg ? &*idf_bg : nullptr,
                           idf_pv ? &*idf_pv : nullptr};

  std::size_t const n_eval = report.eval_ids.size();
  std::size_t const n_tasks = cfg.strategies.size() * n_eval;
  std::vector<CaseScores> results(n_tasks);
  std::vector<ExampleSet> selections(n_tasks);

  for_each_index(n_tasks, cfg.parallelism, [&](std::size_t t) {
    Strategy const s = cfg.strategies[t / n_eval];
    auto const& rec = corpus.at(report.eval_ids[t % n_eval]);

    ExampleSet set;
    switch (s) {
      case Strategy::ZeroShot: set = zero_shot(rec.id); break;
      case Strategy::Random: set = *random_set; break;
      case Strategy::Similarity: set = select_similar(corpus, rec, cfg.k, index); break;
      case Strategy::TagBased: {
        std::optional<ExampleSet> cached;
        if (rec.category) cached = tag_cache.find(*rec.category);
        set = cached ? *cached : *random_set;
        break;
      }
    }
    set.query_id = rec.id;

    auto const prompt = s == Strategy::ZeroShot ? render_zeroshot(rec, tmpl) : render_fewshot(set, rec, tmpl);
    GenerationRequest const req{prompt, cfg.llm.model, cfg.llm.temperature, cfg.llm.max_tokens};
    auto const outcome = gateway.generate(req, {rec.id, std::string(strategy_name(s))});
    auto scores = score_case(classify(outcome, prompt.n_examples, cfg.detectors), rec, ctx);
    scores.strategy = s;
    scores.example_ids = set.ids();
    results[t] = std::move(scores);
    selections[t] = std::move(set);
  });

  report.model_ids["llm"] = cfg.llm.kind == "mock" ? "mock:" + cfg.llm.mock_mode : cfg.llm.model;
  report.model_ids["sentence_embedding"] = need_index ? index.model_id() : "";
  if (auto* http = dynamic_cast<HttpScorerClient*>(embedders.token.get())) {
    report.model_ids["token_embedding"] = http->token_model_id();
  } else {
    report.model_ids["token_embedding"] = embedders.token->model_id();
  }

  for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
    StrategyReport sr;
    sr.strategy = cfg.strategies[si];
    sr.outcome_counts = empty_counts();
    std::vector<std::pair<std::string, ExampleSet>> pairs;
    for (std::size_t i = 0; i < n_eval; ++i) {
      auto& c = results[si * n_eval + i];
      ++sr.outcome_counts[c.status];
      sr.cases.push_back(c);
      if (!selections[si * n_eval + i].examples.empty()) pairs.emplace_back(c.input_id, selections[si * n_eval + i]);
    }
    sr.aggregates = aggregate(sr.cases);
    if (need_index && !pairs.empty()) {
      auto means = mean_query_example_similarity(pairs, index);
      if (auto it = means.find(sr.strategy); it != means.end()) sr.mean_similarity = it->second;
    }
    if (sr.strategy == Strategy::Random && random_set) {
      sr.example_sets = json{{"random", random_set->ids()}, {"seed", cfg.seed}};
    } else if (sr.strategy == Strategy::TagBased) {
      json sets = json::object();
      for (auto c : all_categories()) {
        if (auto s = tag_cache.find(c)) sets[std::string(category_name(c))] = s->ids();
      }
      sr.example_sets = json{{"by_category", sets}, {"seed", cfg.seed}};
    }
    report.strategies.push_back(std::move(sr));
  }

  export_report(report, ReportFormat::Json, out);
  export_report(report, ReportFormat::Csv, out);
  export_report(report, ReportFormat::Markdown, out);
  fs::remove(out / layout::kIncomplete);
  return report;
}

std::vector<CaseScores> rescore_log(ExperimentConfig const& cfg, fs::path const& log_path, RunHooks const& hooks) {
  if (!fs::exists(log_path)) throw Error("response log not found: " + log_path.string());
  Corpus const corpus = load_for(cfg);
  auto const tokenizer = make_tokenizer(cfg.tokenization);
  auto const embedders = make_embedders(cfg, hooks);
  if (cfg.bertscore.idf) throw ConfigError("offline re-scoring does not support idf weighting");
  ScoringContext const ctx{*tokenizer, *embedders.token, cfg.bertscore};

  auto entries = ResponseLog::read_all(log_path);
  std::vector<CaseScores> out(entries.size());
  for_each_index(entries.size(), cfg.parallelism, [&](std::size_t i) {
    auto const& e = entries[i];
    auto s = strategy_from_name(e.strategy);
    if (!s) throw Error("log entry " + e.request_hash + " has unknown strategy '" + e.strategy + "'");
    auto scores = score_case(classify(e.outcome, e.n_examples, cfg.detectors), corpus.at(e.input_id), ctx);
    scores.strategy = *s;
    out[i] = std::move(scores);
  });
  std::ranges::sort(out, [](CaseScores const& a, CaseScores const& b) {
    if (a.strategy != b.strategy) return a.strategy < b.strategy;
    return id_less(a.input_id, b.input_id);
  });
  return out;
}

}  // namespace tagshot
