#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "tagshot/embedding.hpp"
#include "tagshot/prompting.hpp"

namespace tagshot {

enum class OutcomeStatus { Ok, Blocked, Malformed, TransportError };

std::string_view status_name(OutcomeStatus s);
std::optional<OutcomeStatus> status_from_name(std::string_view name);

struct GenerationRequest {
  PromptText prompt;
  std::string model;
  double temperature = 0.0;
  std::optional<int> max_tokens;
};

struct GenerationOutcome {
  OutcomeStatus status = OutcomeStatus::TransportError;
  std::optional<std::string> text;
  std::optional<std::string> reason;
  double latency_ms = 0.0;
  nlohmann::json provider_meta = nlohmann::json::object();

  bool operator==(GenerationOutcome const&) const = default;

  static GenerationOutcome ok(std::string text);
  static GenerationOutcome blocked(std::string reason);
  static GenerationOutcome transport_error(std::string reason);
};

void to_json(nlohmann::json& j, GenerationOutcome const& o);
void from_json(nlohmann::json const& j, GenerationOutcome& o);

/// SHA-256 over the canonical JSON of (model, temperature, max_tokens, prompt).
std::string request_hash(GenerationRequest const& req);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  /// Must be safe to call concurrently. Never returns Malformed.
  virtual GenerationOutcome generate(GenerationRequest const& req) = 0;
};

struct ChatEndpoint {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  /// Name of the environment variable holding the bearer token; empty for
  /// servers that need no auth (e.g. a local Ollama).
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{300};
  RetryPolicy retry;
};

/// Chat-completions over HTTP(S). Content-filter signals (an error code of
/// "content_filter" or a finish_reason of "content_filter", or a refusal
/// field) become Blocked; connection failures, 429 and 5xx are retried with
/// exponential backoff and end as TransportError.
class ChatCompletionsProvider final : public Provider {
 public:
  /// Throws ConfigError when api_key_env is set but missing from the
  /// environment.
  explicit ChatCompletionsProvider(ChatEndpoint endpoint);

  std::string name() const override { return "chat-completions"; }
  GenerationOutcome generate(GenerationRequest const& req) override;

  std::size_t request_count() const { return requests_.load(); }

 private:
  ChatEndpoint endpoint_;
  std::string api_key_;
  std::atomic<std::size_t> requests_{0};
};

/// Deterministic offline provider: scripted outcomes by request hash, and a
/// fallback (by default an Ok echo of the prompt) for everything else.
class MockProvider final : public Provider {
 public:
  using Fallback = std::function<GenerationOutcome(GenerationRequest const&)>;

  explicit MockProvider(std::map<std::string, GenerationOutcome> script = {}, Fallback fallback = echo());

  /// Reads {"<request hash>": {"status": ..., "text": ..., "reason": ...}}.
  static std::map<std::string, GenerationOutcome> load_script(std::string const& path);

  static Fallback echo();
  static Fallback always(GenerationOutcome outcome);

  std::string name() const override { return "mock"; }
  GenerationOutcome generate(GenerationRequest const& req) override;

  std::size_t call_count(std::string const& hash) const;
  std::size_t total_calls() const;

 private:
  std::map<std::string, GenerationOutcome> script_;
  Fallback fallback_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> calls_;
};

struct LogEntry {
  std::string request_hash;
  std::string model;
  std::string input_id;
  std::string strategy;
  std::size_t n_examples = 0;
  std::string template_version;
  GenerationOutcome outcome;
};

nlohmann::json to_json(LogEntry const& e);
LogEntry log_entry_from_json(nlohmann::json const& j);

/// Append-only JSONL response log. Each entry is written as one line with a
/// single write under a lock. Unparseable lines (e.g. a line cut short by a
/// crash) are skipped on load.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path path);

  std::optional<LogEntry> find(std::string const& hash) const;
  void append(LogEntry const& entry);

  std::size_t size() const;
  std::size_t skipped_lines() const { return skipped_; }
  std::filesystem::path const& path() const { return path_; }

  static std::vector<LogEntry> read_all(std::filesystem::path const& path);

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, LogEntry> entries_;
  std::size_t skipped_ = 0;
};

/// Provider front end: serves logged outcomes without calling the provider,
/// times and logs fresh calls. TransportError outcomes are not logged, so a
/// resumed run retries them.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, ResponseLog* log);

  struct Context {
    std::string input_id;
    std::string strategy;
  };

  GenerationOutcome generate(GenerationRequest const& req, Context const& ctx);

  std::size_t provider_calls() const { return provider_calls_.load(); }
  std::size_t log_hits() const { return log_hits_.load(); }

 private:
  std::shared_ptr<Provider> provider_;
  ResponseLog* log_;
  std::atomic<std::size_t> provider_calls_{0};
  std::atomic<std::size_t> log_hits_{0};
};

}  // namespace tagshot
