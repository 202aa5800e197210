#include "tagshot/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "tagshot/error.hpp"
#include "tagshot/text.hpp"

namespace tagshot {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<OutcomeStatus, std::string_view>, 4> kStatusNames{{
    {OutcomeStatus::Ok, "Ok"},
    {OutcomeStatus::Blocked, "Blocked"},
    {OutcomeStatus::Malformed, "Malformed"},
    {OutcomeStatus::TransportError, "TransportError"},
}};

}  // namespace

std::string_view status_name(OutcomeStatus s) {
  for (auto const& [k, v] : kStatusNames)
    if (k == s) return v;
  return "Unknown";
}

std::optional<OutcomeStatus> status_from_name(std::string_view name) {
  for (auto const& [k, v] : kStatusNames)
    if (v == name) return k;
  return std::nullopt;
}

GenerationOutcome GenerationOutcome::ok(std::string text) {
  GenerationOutcome o;
  o.status = OutcomeStatus::Ok;
  o.text = std::move(text);
  return o;
}

GenerationOutcome GenerationOutcome::blocked(std::string reason) {
  GenerationOutcome o;
  o.status = OutcomeStatus::Blocked;
  o.reason = std::move(reason);
  return o;
}

GenerationOutcome GenerationOutcome::transport_error(std::string reason) {
  GenerationOutcome o;
  o.status = OutcomeStatus::TransportError;
  o.reason = std::move(reason);
  return o;
}

void to_json(json& j, GenerationOutcome const& o) {
  j = json{{"status", status_name(o.status)}};
  j["text"] = o.text ? json(*o.text) : json(nullptr);
  j["reason"] = o.reason ? json(*o.reason) : json(nullptr);
  j["latency_ms"] = o.latency_ms;
  j["provider_meta"] = o.provider_meta;
}

void from_json(json const& j, GenerationOutcome& o) {
  auto name = j.at("status").get<std::string>();
  auto status = status_from_name(name);
  if (!status) throw ConfigError("unknown outcome status '" + name + "'");
  o.status = *status;
  o.text = j.contains("text") && !j["text"].is_null() ? std::optional(j["text"].get<std::string>()) : std::nullopt;
  o.reason = j.contains("reason") && !j["reason"].is_null() ? std::optional(j["reason"].get<std::string>()) : std::nullopt;
  o.latency_ms = j.value("latency_ms", 0.0);
  o.provider_meta = j.value("provider_meta", json::object());
}

std::string request_hash(GenerationRequest const& req) {
  json canonical{{"model", req.model},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_tokens ? json(*req.max_tokens) : json(nullptr)},
                 {"prompt", req.prompt.text}};
  return text::sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------
// ChatCompletionsProvider

ChatCompletionsProvider::ChatCompletionsProvider(ChatEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  if (!endpoint_.api_key_env.empty()) {
    char const* key = std::getenv(endpoint_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + endpoint_.api_key_env + " is not set");
    }
    api_key_ = key;
  }
}

namespace {

std::optional<std::string> filter_code(json const& body) {
  auto err = body.find("error");
  if (err == body.end() || !err->is_object()) return std::nullopt;
  auto code = err->value("code", json(nullptr));
  if (code.is_string() && code.get<std::string>() == "content_filter") return "content_filter";
  if (auto inner = err->find("innererror"); inner != err->end() && inner->is_object()) {
    auto icode = inner->value("code", json(nullptr));
    if (icode.is_string() && icode.get<std::string>() == "ResponsibleAIPolicyViolation") return "content_filter";
  }
  return std::nullopt;
}

}  // namespace

GenerationOutcome ChatCompletionsProvider::generate(GenerationRequest const& req) {
  json body{{"model", req.model},
            {"messages", json::array({{{"role", "user"}, {"content", req.prompt.text}}})},
            {"temperature", req.temperature},
            {"stream", false}};
  if (req.max_tokens) body["max_tokens"] = *req.max_tokens;
  std::string const payload = body.dump();

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  int const attempts = std::max(1, endpoint_.retry.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(endpoint_.retry.delay_for(attempt - 1));
    httplib::Client cli(endpoint_.base_url);
    cli.set_connection_timeout(endpoint_.timeout);
    cli.set_read_timeout(endpoint_.timeout);
    ++requests_;
    auto res = cli.Post(endpoint_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (res->status == 200 && !parsed.is_discarded()) {
      GenerationOutcome o;
      o.provider_meta = {{"attempts", attempt}, {"http_status", 200}};
      auto const& choices = parsed.value("choices", json::array());
      if (!choices.is_array() || choices.empty()) {
        o = GenerationOutcome::transport_error("response has no choices");
        o.provider_meta = {{"attempts", attempt}, {"http_status", 200}};
        return o;
      }
      auto const& choice = choices.front();
      auto finish = choice.value("finish_reason", json(nullptr));
      if (finish.is_string()) o.provider_meta["finish_reason"] = finish;
      if (parsed.contains("model")) o.provider_meta["model"] = parsed["model"];
      if (finish.is_string() && finish.get<std::string>() == "content_filter") {
        o.status = OutcomeStatus::Blocked;
        o.reason = "content_filter";
        return o;
      }
      auto const& msg = choice.value("message", json::object());
      if (auto refusal = msg.value("refusal", json(nullptr)); refusal.is_string()) {
        o.status = OutcomeStatus::Blocked;
        o.reason = "refusal: " + refusal.get<std::string>();
        return o;
      }
      auto content = msg.value("content", json(nullptr));
      o.status = OutcomeStatus::Ok;
      o.text = content.is_string() ? content.get<std::string>() : std::string{};
      return o;
    }
    if (!parsed.is_discarded()) {
      if (auto code = filter_code(parsed)) {
        auto o = GenerationOutcome::blocked(*code);
        o.provider_meta = {{"attempts", attempt}, {"http_status", res->status}};
        return o;
      }
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + text::utf8_prefix(res->body, 300);
    bool const retryable = res->status == 429 || res->status >= 500 || res->status == 200;
    if (!retryable) {
      auto o = GenerationOutcome::transport_error(last_error);
      o.provider_meta = {{"attempts", attempt}, {"http_status", res->status}};
      return o;
    }
  }
  auto o = GenerationOutcome::transport_error(last_error);
  o.provider_meta = {{"attempts", attempts}};
  return o;
}

// ---------------------------------------------------------------------------
// MockProvider

MockProvider::MockProvider(std::map<std::string, GenerationOutcome> script, Fallback fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {
  for (auto const& [hash, outcome] : script_) {
    if (outcome.status == OutcomeStatus::Malformed) {
      throw ConfigError("mock script entry " + hash + ": providers cannot return Malformed");
    }
  }
}

std::map<std::string, GenerationOutcome> MockProvider::load_script(std::string const& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (json::exception const& e) {
    throw ConfigError("mock script " + path + ": " + e.what());
  }
  std::map<std::string, GenerationOutcome> script;
  for (auto const& [hash, entry] : j.items()) script.emplace(hash, entry.get<GenerationOutcome>());
  return script;
}

MockProvider::Fallback MockProvider::echo() {
  return [](GenerationRequest const& req) { return GenerationOutcome::ok(req.prompt.text); };
}

MockProvider::Fallback MockProvider::always(GenerationOutcome outcome) {
  return [outcome](GenerationRequest const&) { return outcome; };
}

GenerationOutcome MockProvider::generate(GenerationRequest const& req) {
  auto const hash = request_hash(req);
  {
    std::lock_guard lock(mu_);
    ++calls_[hash];
  }
  if (auto it = script_.find(hash); it != script_.end()) return it->second;
  auto o = fallback_(req);
  if (o.status == OutcomeStatus::Malformed) throw ConfigError("mock fallback returned Malformed");
  return o;
}

std::size_t MockProvider::call_count(std::string const& hash) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(hash);
  return it == calls_.end() ? 0 : it->second;
}

std::size_t MockProvider::total_calls() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (auto const& [_, c] : calls_) n += c;
  return n;
}

// ---------------------------------------------------------------------------
// ResponseLog

json to_json(LogEntry const& e) {
  return json{{"request_hash", e.request_hash}, {"model", e.model},       {"input_id", e.input_id},
              {"strategy", e.strategy},         {"n_examples", e.n_examples}, {"template_version", e.template_version},
              {"outcome", e.outcome}};
}

LogEntry log_entry_from_json(json const& j) {
  LogEntry e;
  e.request_hash = j.at("request_hash").get<std::string>();
  e.model = j.at("model").get<std::string>();
  e.input_id = j.value("input_id", "");
  e.strategy = j.value("strategy", "");
  e.n_examples = j.value("n_examples", std::size_t{0});
  e.template_version = j.value("template_version", "");
  e.outcome = j.at("outcome").get<GenerationOutcome>();
  return e;
}

std::vector<LogEntry> ResponseLog::read_all(std::filesystem::path const& path) {
  std::vector<LogEntry> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(log_entry_from_json(json::parse(line)));
    } catch (std::exception const&) {
    }
  }
  return out;
}

ResponseLog::ResponseLog(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  bool ends_clean = true;
  while (std::getline(in, line)) {
    ends_clean = !in.eof();
    if (line.empty()) continue;
    try {
      auto e = log_entry_from_json(json::parse(line));
      entries_.emplace(e.request_hash, std::move(e));
    } catch (std::exception const&) {
      ++skipped_;
    }
  }
  in.close();
  // A crash mid-write leaves a partial last line; terminate it so later
  // appends start on a fresh line.
  if (!ends_clean && std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0) {
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << '\n';
  }
}

std::optional<LogEntry> ResponseLog::find(std::string const& hash) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseLog::append(LogEntry const& entry) {
  std::string const line = to_json(entry).dump() + "\n";
  std::lock_guard lock(mu_);
  if (entries_.contains(entry.request_hash)) return;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to response log " + path_.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  entries_.emplace(entry.request_hash, entry);
}

std::size_t ResponseLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<Provider> provider, ResponseLog* log) : provider_(std::move(provider)), log_(log) {}

GenerationOutcome Gateway::generate(GenerationRequest const& req, Context const& ctx) {
  auto const hash = request_hash(req);
  if (log_) {
    if (auto hit = log_->find(hash)) {
      ++log_hits_;
      return hit->outcome;
    }
  }
  if (!provider_) throw ConfigError("no provider configured and no logged response for " + ctx.input_id);
  auto const start = std::chrono::steady_clock::now();
  ++provider_calls_;
  auto outcome = provider_->generate(req);
  outcome.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (outcome.status == OutcomeStatus::Malformed) throw Error("provider returned Malformed; only output validation assigns it");
  if (log_ && outcome.status != OutcomeStatus::TransportError) {
    log_->append(LogEntry{hash, req.model, ctx.input_id, ctx.strategy, req.prompt.n_examples, req.prompt.template_version, outcome});
  }
  return outcome;
}

}  // namespace tagshot
