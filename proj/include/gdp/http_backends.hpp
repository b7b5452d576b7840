#pragma once

// Network-backed providers. Kept out of gdp.hpp so that code which does not
// talk to remote services does not pull in the HTTP client.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/llm.hpp"

namespace gdp {

/// "scheme://host[:port]" and "/path" parts of a URL.
struct SplitUrl {
  std::string origin;
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

namespace detail {
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const httplib::Headers& headers,
                                int timeout_s, const char* who) {
  const auto u = split_url(url);
  httplib::Client cli(u.origin);
  cli.set_connection_timeout(timeout_s);
  cli.set_read_timeout(timeout_s);
  auto res = cli.Post(u.path, headers, body.dump(), "application/json");
  if (!res) throw BackendError(std::string(who) + ": request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BackendError(std::string(who) + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError(std::string(who) + ": invalid JSON response: " + e.what());
  }
}
}  // namespace detail

/// Sentence-embedding service client. Sends {"model", "input": [texts]} and
/// accepts either {"embeddings": [[...], ...]} or the OpenAI-style
/// {"data": [{"embedding": [...]}, ...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::string model, std::size_t dimension, int timeout_s = 60)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), dim_(dimension), timeout_s_(timeout_s) {}

  std::string name() const override { return "http:" + model_; }
  std::size_t dimension() const override { return dim_; }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    nlohmann::json res;
    try {
      res = detail::post_json(endpoint_, {{"model", model_}, {"input", texts}}, {}, timeout_s_, "embeddings");
    } catch (const BackendError& e) {
      throw ProviderError(e.what());
    }
    std::vector<std::vector<double>> rows;
    try {
      if (res.contains("embeddings")) {
        rows = res.at("embeddings").get<std::vector<std::vector<double>>>();
      } else {
        for (const auto& d : res.at("data")) rows.push_back(d.at("embedding").get<std::vector<double>>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("embeddings: unexpected response shape: ") + e.what());
    }
    std::vector<EmbeddingVector> out;
    for (auto& r : rows) {
      if (r.size() != dim_) throw ProviderError("embeddings: service returned dimension " + std::to_string(r.size()));
      out.push_back(Eigen::Map<EmbeddingVector>(r.data(), static_cast<Eigen::Index>(r.size())));
    }
    return out;
  }

 private:
  std::string endpoint_;
  std::string model_;
  std::size_t dim_;
  int timeout_s_;
};

/// OpenAI-compatible chat-completion client. The bearer token is read from
/// GDP_LLM_API_KEY when present.
class HttpChatBackend final : public LlmBackend {
 public:
  HttpChatBackend(std::string endpoint, LlmParams params, int timeout_s = 120)
      : endpoint_(std::move(endpoint)), params_(std::move(params)), timeout_s_(timeout_s) {
    if (const char* key = std::getenv("GDP_LLM_API_KEY")) api_key_ = key;
  }

  std::string name() const override { return "http-chat"; }
  const LlmParams& params() const override { return params_; }

  std::string generate(const std::string& prompt) override { return generate_n(prompt, 1).front(); }

  std::vector<std::string> generate_n(const std::string& prompt, std::size_t n) override {
    nlohmann::json body{{"model", params_.model},
                        {"messages", {{{"role", "user"}, {"content", prompt}}}},
                        {"temperature", params_.temperature},
                        {"top_p", params_.top_p},
                        {"n", n}};
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const auto res = detail::post_json(endpoint_, body, headers, timeout_s_, "chat");
    std::vector<std::string> out;
    try {
      for (const auto& c : res.at("choices")) out.push_back(c.at("message").at("content").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("chat: unexpected response shape: ") + e.what());
    }
    if (out.empty()) throw BackendError("chat: response has no choices");
    return out;
  }

 private:
  std::string endpoint_;
  LlmParams params_;
  int timeout_s_;
  std::string api_key_;
};

}  // namespace gdp
