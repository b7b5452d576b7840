#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gdp/pipeline.hpp"
#include "support.hpp"

using namespace gdp;
using gdp::testing::data_dir;
using gdp::testing::temp_dir;

namespace {
PipelineConfig fixture_config(const std::filesystem::path& work) {
  PipelineConfig c;
  c.paths.work_dir = work.string();
  c.gnn.hidden = 32;
  c.gnn.out = 16;
  c.gnn.epochs = 50;
  c.k = 4;
  return c;
}

std::filesystem::path fixture() { return data_dir() / "fixture.doc.json"; }
}  // namespace

TEST(Config, RoundTripAndErrors) {
  PipelineConfig c;
  c.alpha = 0.3;
  c.k = 7;
  c.gnn.epochs = 12;
  c.embeddings.cache_dir = "/tmp/x";
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"alpha":1.5})")), ConfigError);
  try {
    config_from_json(nlohmann::json::parse(R"({"gnn":{"hiden":3}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gnn.hiden"), std::string::npos);
  }
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"K":"five"})")), ConfigError);
}

TEST(Config, EmptyFileGivesDefaultsAndHashIgnoresPaths) {
  const auto dir = temp_dir("cfg");
  detail::write_file(dir / "c.json", "  \n");
  EXPECT_EQ(parse_config(dir / "c.json"), PipelineConfig{});
  PipelineConfig a, b;
  b.paths.work_dir = "/elsewhere";
  b.workers = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.alpha = 0.4;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Pipeline, EndToEndInvariants) {
  const auto work = temp_dir("pipe-e2e");
  const auto cfg = fixture_config(work);
  const auto rt = offline_runtime(cfg);
  const auto r = run_pipeline(fixture(), cfg, rt);
  ASSERT_TRUE(r.presentation);
  const auto& p = *r.presentation;
  EXPECT_EQ(p.slides.size(), cfg.k);
  EXPECT_EQ(r.executed.size(), 6u);
  const auto graph = graph_from_json(nlohmann::json::parse(detail::read_file(r.dir / "graph.json")));
  std::vector<std::size_t> seen;
  for (std::size_t s = 0; s < p.slides.size(); ++s) {
    EXPECT_FALSE(p.slides[s].attribution.empty());
    if (s) EXPECT_LT(p.slides[s - 1].attribution.front(), p.slides[s].attribution.front());
    seen.insert(seen.end(), p.slides[s].attribution.begin(), p.slides[s].attribution.end());
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, graph.node_ids);
  for (const char* k : {"backend", "model", "temperature", "top_p", "config_hash", "seeds", "requested_K"})
    EXPECT_TRUE(p.metadata.contains(k)) << k;
  const auto manifest = nlohmann::json::parse(detail::read_file(r.dir / "manifest.json"));
  for (const char* s : kStageNames) EXPECT_TRUE(manifest["stages"][s]["complete"].get<bool>()) << s;
  EXPECT_FALSE(std::filesystem::exists(r.dir / ".lock"));
}

TEST(Pipeline, ByteIdenticalAcrossRuns) {
  const auto a = temp_dir("pipe-det-a"), b = temp_dir("pipe-det-b");
  const auto ca = fixture_config(a), cb = fixture_config(b);
  const auto ra = run_pipeline(fixture(), ca, offline_runtime(ca));
  const auto rb = run_pipeline(fixture(), cb, offline_runtime(cb));
  EXPECT_EQ(presentation_file_bytes(ra), presentation_file_bytes(rb));
}

TEST(Pipeline, ResumeSkipsCompletedStagesAndRerunsDownstreamOfChange) {
  const auto work = temp_dir("pipe-resume");
  auto cfg = fixture_config(work);
  run_pipeline(fixture(), cfg, offline_runtime(cfg));
  const auto first = detail::read_file(work / "fixture-001" / "generate.json");
  const auto again = run_pipeline(fixture(), cfg, offline_runtime(cfg));
  EXPECT_TRUE(again.executed.empty());
  EXPECT_EQ(again.skipped.size(), 6u);
  EXPECT_EQ(detail::read_file(again.dir / "generate.json"), first);

  cfg.alpha = 0.55;
  const auto changed = run_pipeline(fixture(), cfg, offline_runtime(cfg));
  EXPECT_EQ(changed.skipped, (std::vector<std::string>{"ingest", "pairs"}));
  EXPECT_EQ(changed.executed, (std::vector<std::string>{"graph", "embed", "cluster", "generate"}));

  cfg.k = 3;
  const auto k_changed = run_pipeline(fixture(), cfg, offline_runtime(cfg));
  EXPECT_EQ(k_changed.executed, (std::vector<std::string>{"cluster", "generate"}));
}

TEST(Pipeline, TamperedArtifactIsRecomputed) {
  const auto work = temp_dir("pipe-tamper");
  const auto cfg = fixture_config(work);
  run_pipeline(fixture(), cfg, offline_runtime(cfg));
  detail::write_file(work / "fixture-001" / "embed.json", "{}");
  const auto r = run_pipeline(fixture(), cfg, offline_runtime(cfg));
  EXPECT_EQ(r.executed, (std::vector<std::string>{"embed"}));
}

TEST(Pipeline, StopsAtRequestedStage) {
  const auto work = temp_dir("pipe-until");
  const auto cfg = fixture_config(work);
  const auto r = run_pipeline(fixture(), cfg, offline_runtime(cfg), Stage::graph);
  EXPECT_EQ(r.executed, (std::vector<std::string>{"ingest", "pairs", "graph"}));
  EXPECT_FALSE(r.presentation);
}

TEST(Pipeline, EmptyGraphNamesStageAndAlpha) {
  const auto work = temp_dir("pipe-empty");
  auto cfg = fixture_config(work);
  cfg.alpha = 0.999;
  try {
    run_pipeline(fixture(), cfg, offline_runtime(cfg));
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "graph");
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
}

TEST(Pipeline, KLargerThanGraphFallsBack) {
  NodeEmbeddings emb{Eigen::MatrixXd::Identity(3, 3), {0, 2, 4}};
  Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(6, 6);
  prob(1, 0) = prob(0, 1) = 0.4;
  prob(3, 2) = prob(2, 3) = 0.45;
  prob(5, 4) = prob(4, 5) = 0.2;
  std::vector<std::string> w;
  auto cs = plan_clusters(emb, prob, 5, 0, &w);
  EXPECT_EQ(cs.size(), 5u);
  EXPECT_TRUE(w.empty());
  const auto plan = order_clusters(cs);
  EXPECT_EQ(plan.nodes(), (std::vector<std::size_t>{0, 1, 2, 3, 4}));  // 3 then 1 added, 5 left out
  cs = plan_clusters(emb, prob, 9, 0, &w);
  EXPECT_EQ(cs.size(), 6u);
  EXPECT_EQ(w.size(), 1u);
}

TEST(Pipeline, LockRejectsConcurrentRun) {
  const auto work = temp_dir("pipe-lock");
  const auto cfg = fixture_config(work);
  detail::DirLock held(work / "fixture-001");
  EXPECT_THROW(run_pipeline(fixture(), cfg, offline_runtime(cfg)), IoError);
}

TEST(Pipeline, BatchRunsIndependentDocuments) {
  const auto work = temp_dir("pipe-batch");
  auto doc = load_document(fixture());
  doc.doc_id = "fixture-copy";
  save_document(doc, work / "copy.json");
  auto cfg = fixture_config(work / "out");
  cfg.workers = 2;
  const auto items = run_batch({fixture(), work / "copy.json"}, cfg, offline_runtime(cfg));
  ASSERT_EQ(items.size(), 2u);
  for (const auto& it : items) {
    EXPECT_TRUE(it.error.empty()) << it.error;
    ASSERT_TRUE(it.result);
  }
  // same content, different doc_id: slides agree
  EXPECT_EQ(presentation_to_json(*items[0].result->presentation)["slides"],
            presentation_to_json(*items[1].result->presentation)["slides"]);
}
