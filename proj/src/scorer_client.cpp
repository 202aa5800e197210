#include <thread>

#include <httplib.h>

#include "tagshot/embedding.hpp"
#include "tagshot/error.hpp"

namespace tagshot {

using nlohmann::json;

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  auto d = base_delay;
  for (int i = 1; i < attempt && d < max_delay; ++i) d *= 2;
  return std::min(d, max_delay);
}

HttpScorerClient::HttpScorerClient(ScorerEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

json HttpScorerClient::post(std::string const& path, json const& body) {
  std::string const payload = body.dump();
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, endpoint_.retry.max_attempts); ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(endpoint_.retry.delay_for(attempt - 1));
    httplib::Client cli(endpoint_.base_url);
    cli.set_connection_timeout(endpoint_.timeout);
    cli.set_read_timeout(endpoint_.timeout);
    ++requests_;
    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (json::parse_error const& e) {
        throw EmbeddingError(path + ": invalid JSON response: " + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    bool retryable = res->status == 429 || res->status >= 500;
    if (!retryable) throw EmbeddingError(path + " rejected request: " + last_error);
  }
  throw EmbeddingError(path + " failed after " + std::to_string(endpoint_.retry.max_attempts) + " attempts (" + last_error + ")");
}

json HttpScorerClient::health() {
  httplib::Client cli(endpoint_.base_url);
  cli.set_connection_timeout(endpoint_.timeout);
  cli.set_read_timeout(endpoint_.timeout);
  ++requests_;
  auto res = cli.Get("/health");
  if (!res) throw EmbeddingError("/health: transport: " + httplib::to_string(res.error()));
  if (res->status != 200) throw EmbeddingError("/health: HTTP " + std::to_string(res->status));
  return json::parse(res->body);
}

namespace {

// Resolves "<model>@<revision>" for a model slot from a /health manifest.
std::string manifest_model(json const& h, std::string const& slot) {
  std::string model;
  std::string revision;
  if (auto m = h.find("models"); m != h.end()) {
    if (m->is_object() && m->contains(slot)) model = (*m)[slot].get<std::string>();
  }
  if (auto r = h.find("revisions"); r != h.end()) {
    if (r->is_object() && r->contains(slot) && (*r)[slot].is_string()) revision = (*r)[slot].get<std::string>();
  }
  if (model.empty()) throw EmbeddingError("/health manifest lacks models." + slot);
  return revision.empty() ? model : model + "@" + revision;
}

}  // namespace

std::string HttpScorerClient::model_id() {
  std::lock_guard lock(model_mu_);
  if (!sentence_model_id_) {
    sentence_model_id_ = endpoint_.sentence_model.empty() ? manifest_model(health(), "sentence") : endpoint_.sentence_model;
  }
  return *sentence_model_id_;
}

std::string HttpScorerClient::token_model_id() {
  std::lock_guard lock(model_mu_);
  if (!token_model_id_) {
    token_model_id_ = endpoint_.token_model.empty() ? manifest_model(health(), "token") : endpoint_.token_model;
  }
  return *token_model_id_;
}

std::vector<EmbeddingVector> HttpScorerClient::embed(std::vector<std::string> const& texts) {
  json body{{"texts", texts}};
  if (!endpoint_.sentence_model.empty()) body["model"] = endpoint_.sentence_model;
  auto resp = post("/embed", body);
  auto const& vecs = resp.at("vectors");
  if (!vecs.is_array() || vecs.size() != texts.size()) throw EmbeddingError("/embed: vector count does not match text count");
  auto const model = resp.value("model_id", std::string{});
  auto const dim = resp.value("dim", std::size_t{0});
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto const& v : vecs) {
    EmbeddingVector ev{v.get<std::vector<double>>(), model};
    if (dim != 0 && ev.dim() != dim) throw EmbeddingError("/embed: vector length differs from declared dim");
    validate_vector(ev);
    out.push_back(std::move(ev));
  }
  return out;
}

TokenEmbedding HttpScorerClient::token_embed(std::string const& text) {
  json body{{"text", text}};
  if (!endpoint_.token_model.empty()) body["model"] = endpoint_.token_model;
  auto resp = post("/token_embed", body);
  TokenEmbedding te;
  te.model_id = resp.value("model_id", std::string{});
  te.tokens = resp.at("tokens").get<std::vector<std::string>>();
  te.vectors = resp.at("vectors").get<std::vector<std::vector<double>>>();
  te.special_mask = resp.at("special_mask").get<std::vector<bool>>();
  if (te.tokens.size() != te.vectors.size() || te.tokens.size() != te.special_mask.size()) {
    throw EmbeddingError("/token_embed: tokens, vectors and special_mask differ in length");
  }
  return te;
}

}  // namespace tagshot
