// SPDX-License-Identifier: Apache-2.0
//
// HTTPS backends for the OpenAI chat/embeddings API and the Gemini
// generateContent/batchEmbedContents API. Credentials come from the
// environment only: OPENAI_API_KEY, GEMINI_API_KEY (or GOOGLE_API_KEY).
#pragma once

#include <cstdlib>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "lexcomm/error.hpp"
#include "lexcomm/gateway.hpp"

namespace lexcomm {

struct LiveOptions {
  std::string openai_base_url = "https://api.openai.com";
  std::string google_base_url = "https://generativelanguage.googleapis.com";
  std::map<std::string, std::string> api_keys;  // provider -> key; filled from the environment when empty
  int timeout_seconds = 300;

  static std::optional<std::string> env(const char* name) {
    if (const char* v = std::getenv(name); v && *v) return std::string(v);
    return std::nullopt;
  }

  /// Reads keys for the given providers from the environment. A provider without
  /// a key is a configuration error.
  void require(const std::set<std::string>& providers) {
    for (const auto& p : providers) {
      if (api_keys.contains(p)) continue;
      std::optional<std::string> key;
      if (p == "openai") key = env("OPENAI_API_KEY");
      if (p == "google") key = env("GEMINI_API_KEY") ? env("GEMINI_API_KEY") : env("GOOGLE_API_KEY");
      if (p != "openai" && p != "google") throw ConfigError("no live backend for provider '" + p + "'");
      if (!key) {
        throw ConfigError("backend=live needs credentials for provider '" + p + "' (" +
                          (p == "openai" ? "OPENAI_API_KEY" : "GEMINI_API_KEY") + ")");
      }
      api_keys[p] = *key;
    }
  }
};

class LiveBackend : public Backend {
 public:
  explicit LiveBackend(LiveOptions options) : options_(std::move(options)) {}

  bool is_live() const override { return true; }

  std::string complete(const CompletionRequest& r) override {
    if (r.model.provider == "google") return gemini_complete(r);
    if (r.model.provider == "openai") return openai_complete(r);
    throw GatewayError(false, "unsupported provider '" + r.model.provider + "'");
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const ModelId& model) override {
    if (model.provider == "google") return gemini_embed(texts, model);
    if (model.provider == "openai") return openai_embed(texts, model);
    throw GatewayError(false, "unsupported provider '" + model.provider + "'");
  }

 private:
  const std::string& key(const std::string& provider) const {
    auto it = options_.api_keys.find(provider);
    if (it == options_.api_keys.end()) throw GatewayError(false, "no API key for provider '" + provider + "'");
    return it->second;
  }

  nlohmann::json post(const std::string& base, const std::string& path, const httplib::Headers& headers,
                      const nlohmann::json& body) const {
    httplib::Client client(base);
    client.set_connection_timeout(30);
    client.set_read_timeout(options_.timeout_seconds);
    client.set_write_timeout(60);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw GatewayError(true, "transport failure: " + httplib::to_string(res.error()));
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      if (res->status >= 500 || res->status == 429) {
        throw GatewayError(true, "HTTP " + std::to_string(res->status));
      }
      throw GatewayError(false, "HTTP " + std::to_string(res->status) + ": non-JSON response");
    }
    if (res->status == 429 || res->status >= 500) {
      throw GatewayError(true, "HTTP " + std::to_string(res->status) + ": " + provider_message(doc));
    }
    if (res->status >= 400) {
      throw GatewayError(false, "HTTP " + std::to_string(res->status) + ": " + provider_message(doc));
    }
    return doc;
  }

  static std::string provider_message(const nlohmann::json& doc) {
    if (doc.contains("error")) {
      const auto& e = doc["error"];
      if (e.is_object() && e.contains("message") && e["message"].is_string()) return e["message"].get<std::string>();
      if (e.is_string()) return e.get<std::string>();
    }
    return doc.dump();
  }

  std::string openai_complete(const CompletionRequest& r) const {
    nlohmann::json body{{"model", r.model.name},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}})}};
    if (r.params.temperature) body["temperature"] = *r.params.temperature;
    if (r.params.top_p) body["top_p"] = *r.params.top_p;
    if (r.params.max_tokens) body["max_completion_tokens"] = *r.params.max_tokens;
    const auto doc = post(options_.openai_base_url, "/v1/chat/completions",
                          {{"Authorization", "Bearer " + key("openai")}}, body);
    try {
      const auto& msg = doc.at("choices").at(0).at("message");
      if (msg.contains("refusal") && msg["refusal"].is_string()) {
        throw GatewayError(false, "provider refused: " + msg["refusal"].get<std::string>());
      }
      return msg.at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(false, std::string("unexpected chat response: ") + e.what());
    }
  }

  std::vector<std::vector<double>> openai_embed(const std::vector<std::string>& texts, const ModelId& model) const {
    const auto doc = post(options_.openai_base_url, "/v1/embeddings", {{"Authorization", "Bearer " + key("openai")}},
                          {{"model", model.name}, {"input", texts}});
    try {
      std::vector<std::vector<double>> out(texts.size());
      for (const auto& item : doc.at("data")) {
        out.at(item.at("index").get<std::size_t>()) = item.at("embedding").get<std::vector<double>>();
      }
      return out;
    } catch (const std::exception& e) {
      throw GatewayError(false, std::string("unexpected embedding response: ") + e.what());
    }
  }

  std::string gemini_complete(const CompletionRequest& r) const {
    nlohmann::json body{{"contents", nlohmann::json::array({{{"role", "user"}, {"parts", {{{"text", r.prompt}}}}}})}};
    nlohmann::json gen = nlohmann::json::object();
    if (r.params.temperature) gen["temperature"] = *r.params.temperature;
    if (r.params.top_p) gen["topP"] = *r.params.top_p;
    if (r.params.max_tokens) gen["maxOutputTokens"] = *r.params.max_tokens;
    if (!gen.empty()) body["generationConfig"] = gen;
    const auto doc = post(options_.google_base_url, "/v1beta/models/" + r.model.name + ":generateContent",
                          {{"x-goog-api-key", key("google")}}, body);
    if (doc.contains("promptFeedback") && doc["promptFeedback"].contains("blockReason")) {
      throw GatewayError(false, "provider refused: " + doc["promptFeedback"]["blockReason"].dump());
    }
    try {
      std::string out;
      for (const auto& part : doc.at("candidates").at(0).at("content").at("parts")) {
        if (part.contains("text")) out += part["text"].get<std::string>();
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(false, std::string("unexpected generateContent response: ") + e.what());
    }
  }

  std::vector<std::vector<double>> gemini_embed(const std::vector<std::string>& texts, const ModelId& model) const {
    nlohmann::json requests = nlohmann::json::array();
    for (const auto& t : texts) {
      requests.push_back({{"model", "models/" + model.name}, {"content", {{"parts", {{{"text", t}}}}}}});
    }
    const auto doc = post(options_.google_base_url, "/v1beta/models/" + model.name + ":batchEmbedContents",
                          {{"x-goog-api-key", key("google")}}, {{"requests", requests}});
    try {
      std::vector<std::vector<double>> out;
      for (const auto& e : doc.at("embeddings")) out.push_back(e.at("values").get<std::vector<double>>());
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(false, std::string("unexpected embedding response: ") + e.what());
    }
  }

  LiveOptions options_;
};

}  // namespace lexcomm
