#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gdp/classifier.hpp"
#include "gdp/clustering.hpp"
#include "gdp/config.hpp"
#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/generation.hpp"
#include "gdp/graph.hpp"
#include "gdp/hash.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/llm.hpp"

namespace gdp {

enum class Stage { ingest = 0, pairs, graph, embed, cluster, generate };

inline constexpr const char* kStageNames[] = {"ingest", "pairs", "graph", "embed", "cluster", "generate"};

inline const char* stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }

/// Services a pipeline run needs. `make_llm` is called once per run so
/// concurrent runs never share a backend instance.
struct Runtime {
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<PairClassifier> classifier;
  std::function<std::unique_ptr<LlmBackend>()> make_llm;
};

/// Runtime backed entirely by offline components: hash embeddings, the
/// cosine classifier (or a checkpoint) and the mock LLM.
inline Runtime offline_runtime(const PipelineConfig& cfg) {
  Runtime rt;
  EmbedderOptions eo;
  if (cfg.embeddings.cache_dir) eo.cache_dir = *cfg.embeddings.cache_dir;
  rt.embedder = std::make_shared<Embedder>(
      std::make_shared<HashEmbeddingProvider>(cfg.embeddings.dimension, cfg.embeddings.seed), eo);
  if (cfg.classifier.backend == "embedding-mlp")
    rt.classifier = load_classifier(*cfg.classifier.checkpoint, rt.embedder);
  else
    rt.classifier = std::make_shared<CosineClassifier>(rt.embedder);
  rt.make_llm = [] { return std::make_unique<MockLlm>(); };
  return rt;
}

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

/// Exclusive per-directory lock held for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw IoError("another run holds " + path_.string() + " (remove it if no run is active)");
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

inline std::vector<double> upper_triangle(const Eigen::MatrixXd& p) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = i + 1; j < p.cols(); ++j) v.push_back(p(i, j));
  return v;
}

inline Eigen::MatrixXd from_upper_triangle(std::size_t n, const std::vector<double>& v) {
  if (v.size() != n * (n - 1) / 2) throw SchemaError("pairs artifact: wrong number of probabilities");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[k];
      p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v[k];
      ++k;
    }
  return p;
}

}  // namespace detail

/// Clusters for the plan, including the remedy for K larger than the graph:
/// pruned paragraphs are re-added as singleton clusters in descending order
/// of their largest pair probability (ties by lower index); if that is still
/// not enough, K shrinks to the number of available nodes.
inline std::vector<Cluster> plan_clusters(const NodeEmbeddings& emb, const Eigen::MatrixXd& prob, std::size_t k,
                                          std::uint64_t seed, std::vector<std::string>* warnings = nullptr) {
  const std::size_t v = emb.node_ids.size();
  if (k <= v) return spectral_cluster(emb.z, emb.node_ids, k, seed);

  std::vector<std::size_t> pruned;
  for (std::size_t p = 0; p < static_cast<std::size_t>(prob.rows()); ++p)
    if (!std::binary_search(emb.node_ids.begin(), emb.node_ids.end(), p)) pruned.push_back(p);
  auto max_prob = [&](std::size_t p) { return prob.row(static_cast<Eigen::Index>(p)).maxCoeff(); };
  std::stable_sort(pruned.begin(), pruned.end(), [&](auto a, auto b) { return max_prob(a) > max_prob(b); });
  const std::size_t added = std::min(k - v, pruned.size());
  if (added < k - v && warnings)
    warnings->push_back("K = " + std::to_string(k) + " exceeds the " + std::to_string(v + added) +
                        " available paragraphs; using K = " + std::to_string(v + added));
  auto clusters = spectral_cluster(emb.z, emb.node_ids, std::min(k - added, v), seed);
  for (std::size_t a = 0; a < added; ++a) clusters.push_back({pruned[a]});
  return clusters;
}

struct RunResult {
  std::filesystem::path dir;
  std::optional<GeneratedPresentation> presentation;
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::vector<std::string> warnings;
};

/// Runs ingest -> pairs -> graph -> embed -> cluster -> generate for one
/// document, writing `<work_dir>/<doc_id>/<stage>.json` and `manifest.json`.
///
/// A stage is skipped when the manifest records the same input key and the
/// artifact on disk still has the recorded hash. A stage's key covers the
/// config values it reads and the artifact hashes of its inputs, so a change
/// re-runs exactly the affected stage and everything downstream.
inline RunResult run_pipeline(const std::filesystem::path& doc_path, const PipelineConfig& cfg, const Runtime& rt,
                              Stage until = Stage::generate) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  cfg.validate();

  const auto doc_bytes = detail::read_file(doc_path);
  const auto parsed_doc = document_from_json(detail::parse_json(doc_bytes, doc_path.string()));
  RunResult result;
  result.dir = fs::path(cfg.paths.work_dir) / parsed_doc.doc_id;
  detail::DirLock lock(result.dir);

  const auto manifest_path = result.dir / "manifest.json";
  json manifest = json::object();
  if (fs::exists(manifest_path)) {
    try {
      manifest = json::parse(detail::read_file(manifest_path));
    } catch (const json::parse_error&) {
      manifest = json::object();
    }
  }
  if (!manifest.contains("stages") || !manifest["stages"].is_object()) manifest["stages"] = json::object();
  manifest["doc_id"] = parsed_doc.doc_id;
  manifest["config_hash"] = config_hash(cfg);

  json hashes = json::object();  // stage -> artifact hash of this run

  // Runs or reuses one stage and returns its artifact.
  auto run_stage = [&](Stage s, const json& key_material, const std::vector<Stage>& inputs,
                       const std::function<json()>& produce) -> json {
    const std::string name = stage_name(s);
    json upstream = json::object();
    for (auto in : inputs) upstream[stage_name(in)] = hashes.at(stage_name(in));
    const auto key = sha256_hex(json{{"stage", name}, {"params", key_material}, {"upstream", upstream}}.dump());
    const auto artifact_path = result.dir / (name + ".json");
    const auto& rec = manifest["stages"].contains(name) ? manifest["stages"][name] : json();
    if (rec.is_object() && rec.value("complete", false) && rec.value("key", "") == key && fs::exists(artifact_path)) {
      const auto bytes = detail::read_file(artifact_path);
      if (sha256_hex(bytes) == rec.value("artifact_hash", "")) {
        hashes[name] = rec["artifact_hash"];
        result.skipped.push_back(name);
        return json::parse(bytes);
      }
    }
    json artifact;
    try {
      artifact = produce();
    } catch (const GenerationAborted&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e.what());
    }
    artifact["upstream"] = upstream;
    const auto bytes = artifact.dump(2) + "\n";
    detail::write_atomic(artifact_path, bytes);
    const auto h = sha256_hex(bytes);
    hashes[name] = h;
    manifest["stages"][name] = {{"complete", true},     {"key", key},
                                {"artifact", name + ".json"}, {"artifact_hash", h},
                                {"inputs", upstream},   {"completed_at", detail::utc_now()}};
    detail::write_atomic(manifest_path, manifest.dump(2) + "\n");
    result.executed.push_back(name);
    return artifact;
  };

  auto reached = [&](Stage s) { return static_cast<int>(s) > static_cast<int>(until); };

  // ingest
  const auto ingest = run_stage(Stage::ingest, {{"source_sha256", sha256_hex(doc_bytes)}}, {},
                                [&] { return document_to_json(parsed_doc); });
  const auto doc = document_from_json(ingest);
  if (reached(Stage::pairs)) return result;

  // pairs
  const auto pairs = run_stage(
      Stage::pairs,
      {{"classifier", rt.classifier->name()},
       {"classifier_config", config_to_json(cfg)["classifier"]},
       {"embeddings", json{{"provider", rt.embedder->name()}, {"dimension", rt.embedder->dimension()}}},
       {"max_paragraphs", cfg.max_paragraphs}},
      {Stage::ingest}, [&]() -> json {
        if (doc.size() > cfg.max_paragraphs)
          throw ConfigError("document has " + std::to_string(doc.size()) + " paragraphs; pairwise scoring is capped at " +
                            std::to_string(cfg.max_paragraphs) + " (raise max_paragraphs or split the document)");
        const auto p = rt.classifier->probability_matrix(doc);
        return {{"doc_id", doc.doc_id},
                {"n", doc.size()},
                {"classifier", rt.classifier->name()},
                {"probabilities", detail::upper_triangle(p)}};
      });
  const auto prob = detail::from_upper_triangle(pairs.at("n").get<std::size_t>(),
                                                pairs.at("probabilities").get<std::vector<double>>());
  if (reached(Stage::graph)) return result;

  // graph
  const auto graph_json = run_stage(
      Stage::graph, {{"alpha", cfg.alpha}, {"embeddings", rt.embedder->name()}}, {Stage::ingest, Stage::pairs},
      [&]() -> json {
        try {
          return graph_to_json(build_graph(doc, prob, cfg.alpha, *rt.embedder));
        } catch (const EmptyGraph& e) {
          throw EmptyGraph(std::string(e.what()) + " (try a lower alpha than " + std::to_string(cfg.alpha) + ")");
        }
      });
  const auto graph = graph_from_json(graph_json);
  if (reached(Stage::embed)) return result;

  // embed
  const auto embed_json = run_stage(Stage::embed, config_to_json(cfg)["gnn"], {Stage::graph}, [&]() -> json {
    GnnConfig gc{cfg.gnn.hidden, cfg.gnn.out, cfg.gnn.epochs, cfg.gnn.lr, cfg.gnn.seed};
    const auto trained = train_gnn(graph, gc);
    auto j = embeddings_to_json(trained.embeddings);
    j["loss_trace"] = trained.loss_trace;
    j["complete_graph"] = trained.complete_graph;
    return j;
  });
  const auto emb = embeddings_from_json(embed_json);
  if (reached(Stage::cluster)) return result;

  // cluster
  const auto cluster_json =
      run_stage(Stage::cluster, {{"K", cfg.k}, {"seed", cfg.seed}}, {Stage::pairs, Stage::embed}, [&]() -> json {
        std::vector<std::string> warnings;
        auto plan = order_clusters(plan_clusters(emb, prob, cfg.k, cfg.seed, &warnings), doc.doc_id);
        auto j = plan_to_json(plan);
        j["metadata"]["requested_K"] = cfg.k;
        j["metadata"]["warnings"] = warnings;
        return j;
      });
  const auto plan = plan_from_json(cluster_json);
  for (const auto& w : cluster_json.at("metadata").value("warnings", std::vector<std::string>{}))
    result.warnings.push_back(w);
  if (reached(Stage::generate)) return result;

  // generate
  const auto gen_json = run_stage(
      Stage::generate, {{"llm", config_to_json(cfg)["llm"]}, {"config_hash", config_hash(cfg)}},
      {Stage::ingest, Stage::cluster}, [&]() -> json {
        auto llm = rt.make_llm();
        GeneratedPresentation pres;
        try {
          pres = generate_presentation(doc, plan, *llm, {cfg.llm.max_retries});
        } catch (const GenerationAborted& e) {
          auto partial = presentation_to_json(e.partial());
          partial["metadata"]["config_hash"] = config_hash(cfg);
          detail::write_atomic(result.dir / "generate.partial.json", partial.dump(2) + "\n");
          throw StageError("generate", e.what());
        }
        pres.metadata["config_hash"] = config_hash(cfg);
        pres.metadata["seeds"] = {{"gnn", cfg.gnn.seed}, {"cluster", cfg.seed}};
        pres.metadata["requested_K"] = cfg.k;
        pres.metadata["classifier"] = rt.classifier->name();
        pres.metadata["embeddings"] = rt.embedder->name();
        return presentation_to_json(pres);
      });
  result.presentation = presentation_from_json(gen_json);
  return result;
}

/// Bytes of the final presentation file (the generate artifact).
inline std::string presentation_file_bytes(const RunResult& r) {
  return detail::read_file(r.dir / "generate.json");
}

struct BatchItem {
  std::filesystem::path doc;
  std::optional<RunResult> result;
  std::string error;
};

/// Runs several documents with up to `cfg.workers` concurrent pipelines.
inline std::vector<BatchItem> run_batch(const std::vector<std::filesystem::path>& docs, const PipelineConfig& cfg,
                                        const Runtime& rt) {
  std::vector<BatchItem> items(docs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < docs.size();) {
      items[i].doc = docs[i];
      try {
        items[i].result = run_pipeline(docs[i], cfg, rt);
      } catch (const std::exception& e) {
        items[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(cfg.workers, docs.size()); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return items;
}

}  // namespace gdp
