#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "gdp/errors.hpp"
#include "gdp/hash.hpp"
#include "gdp/ingestion.hpp"

namespace gdp {

struct GnnSection {
  std::size_t hidden = 128;
  std::size_t out = 64;
  std::size_t epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
  friend bool operator==(const GnnSection&, const GnnSection&) = default;
};

struct ClassifierSection {
  std::string backend = "cosine-fallback";  // or "embedding-mlp"
  std::optional<std::string> checkpoint;
  friend bool operator==(const ClassifierSection&, const ClassifierSection&) = default;
};

struct EmbeddingsSection {
  std::string provider = "mock-hash";  // or "http"
  std::size_t dimension = 64;
  std::uint64_t seed = 0;
  std::optional<std::string> cache_dir;
  std::string endpoint = "http://127.0.0.1:8080/embed";
  std::string model = "sentence-transformers/all-mpnet-base-v2";
  friend bool operator==(const EmbeddingsSection&, const EmbeddingsSection&) = default;
};

struct LlmSection {
  std::string backend = "mock";  // or "http-chat"
  std::string model = "gpt-3.5-turbo-1106";
  double temperature = 0.7;
  double top_p = 0.95;
  std::size_t max_retries = 3;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  friend bool operator==(const LlmSection&, const LlmSection&) = default;
};

struct PathsSection {
  std::string work_dir = "work";
  friend bool operator==(const PathsSection&, const PathsSection&) = default;
};

struct PipelineConfig {
  double alpha = 0.5;
  std::size_t k = 5;
  std::uint64_t seed = 0;  // clustering
  std::size_t max_paragraphs = 500;
  std::size_t workers = 1;
  GnnSection gnn;
  ClassifierSection classifier;
  EmbeddingsSection embeddings;
  LlmSection llm;
  PathsSection paths;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha: must lie in (0, 1)");
    if (k < 1) throw ConfigError("K: must be at least 1");
    if (max_paragraphs < 2) throw ConfigError("max_paragraphs: must be at least 2");
    if (workers < 1) throw ConfigError("workers: must be at least 1");
    if (gnn.hidden < 1 || gnn.out < 1) throw ConfigError("gnn.hidden/gnn.out: must be positive");
    if (!(gnn.lr > 0.0)) throw ConfigError("gnn.lr: must be positive");
    if (classifier.backend != "cosine-fallback" && classifier.backend != "embedding-mlp")
      throw ConfigError("classifier.backend: expected \"cosine-fallback\" or \"embedding-mlp\"");
    if (classifier.backend == "embedding-mlp" && !classifier.checkpoint)
      throw ConfigError("classifier.checkpoint: required for the embedding-mlp backend");
    if (embeddings.provider != "mock-hash" && embeddings.provider != "http")
      throw ConfigError("embeddings.provider: expected \"mock-hash\" or \"http\"");
    if (embeddings.dimension < 1) throw ConfigError("embeddings.dimension: must be positive");
    if (llm.backend != "mock" && llm.backend != "http-chat")
      throw ConfigError("llm.backend: expected \"mock\" or \"http-chat\"");
    if (!(llm.temperature >= 0.0)) throw ConfigError("llm.temperature: must be non-negative");
    if (!(llm.top_p > 0.0 && llm.top_p <= 1.0)) throw ConfigError("llm.top_p: must lie in (0, 1]");
  }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    const auto kp = where(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(kp + ": expected a string");
      out = it->template get<std::string>();
    } else if constexpr (std::is_same_v<T, std::optional<std::string>>) {
      if (it->is_null()) out.reset();
      else if (it->is_string()) out = it->template get<std::string>();
      else throw ConfigError(kp + ": expected a string or null");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(kp + ": expected a number");
      out = it->template get<double>();
    } else {
      if (!it->is_number_unsigned()) throw ConfigError(kp + ": expected a non-negative integer");
      out = it->template get<T>();
    }
  }

  ConfigReader section(const char* key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    auto it = obj_.find(key);
    return ConfigReader(it == obj_.end() ? empty : *it, where(key));
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
  }

 private:
  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  detail::ConfigReader root(j, "");
  root.read("alpha", c.alpha);
  root.read("K", c.k);
  root.read("seed", c.seed);
  root.read("max_paragraphs", c.max_paragraphs);
  root.read("workers", c.workers);
  {
    auto s = root.section("gnn");
    s.read("hidden", c.gnn.hidden);
    s.read("out", c.gnn.out);
    s.read("epochs", c.gnn.epochs);
    s.read("lr", c.gnn.lr);
    s.read("seed", c.gnn.seed);
    s.reject_unknown();
  }
  {
    auto s = root.section("classifier");
    s.read("backend", c.classifier.backend);
    s.read("checkpoint", c.classifier.checkpoint);
    s.reject_unknown();
  }
  {
    auto s = root.section("embeddings");
    s.read("provider", c.embeddings.provider);
    s.read("dimension", c.embeddings.dimension);
    s.read("seed", c.embeddings.seed);
    s.read("cache_dir", c.embeddings.cache_dir);
    s.read("endpoint", c.embeddings.endpoint);
    s.read("model", c.embeddings.model);
    s.reject_unknown();
  }
  {
    auto s = root.section("llm");
    s.read("backend", c.llm.backend);
    s.read("model", c.llm.model);
    s.read("temperature", c.llm.temperature);
    s.read("top_p", c.llm.top_p);
    s.read("max_retries", c.llm.max_retries);
    s.read("endpoint", c.llm.endpoint);
    s.reject_unknown();
  }
  {
    auto s = root.section("paths");
    s.read("work_dir", c.paths.work_dir);
    s.reject_unknown();
  }
  root.reject_unknown();
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  return {{"alpha", c.alpha},
          {"K", c.k},
          {"seed", c.seed},
          {"max_paragraphs", c.max_paragraphs},
          {"workers", c.workers},
          {"gnn", {{"hidden", c.gnn.hidden}, {"out", c.gnn.out}, {"epochs", c.gnn.epochs}, {"lr", c.gnn.lr}, {"seed", c.gnn.seed}}},
          {"classifier", {{"backend", c.classifier.backend}, {"checkpoint", opt(c.classifier.checkpoint)}}},
          {"embeddings",
           {{"provider", c.embeddings.provider},
            {"dimension", c.embeddings.dimension},
            {"seed", c.embeddings.seed},
            {"cache_dir", opt(c.embeddings.cache_dir)},
            {"endpoint", c.embeddings.endpoint},
            {"model", c.embeddings.model}}},
          {"llm",
           {{"backend", c.llm.backend},
            {"model", c.llm.model},
            {"temperature", c.llm.temperature},
            {"top_p", c.llm.top_p},
            {"max_retries", c.llm.max_retries},
            {"endpoint", c.llm.endpoint}}},
          {"paths", {{"work_dir", c.paths.work_dir}}}};
}

/// Reads a JSON config file; an empty (or whitespace-only) file yields the
/// defaults.
inline PipelineConfig parse_config(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (text::trim(bytes).empty()) return PipelineConfig{};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

/// Hash of the settings that influence results; locations on disk are
/// excluded so runs in different directories agree.
inline std::string config_hash(const PipelineConfig& c) {
  auto j = config_to_json(c);
  j.erase("paths");
  j.erase("workers");
  j["embeddings"].erase("cache_dir");
  return sha256_hex(j.dump());
}

}  // namespace gdp
