// gdp: command-line front end for the document-to-slides pipeline.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gdp/gdp.hpp"
#include "gdp/http_backends.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config;
  std::string work_dir;
  std::optional<std::uint64_t> seed;
};

gdp::PipelineConfig load_config(const GlobalOptions& g) {
  gdp::PipelineConfig cfg = g.config.empty() ? gdp::PipelineConfig{} : gdp::parse_config(g.config);
  if (!g.work_dir.empty()) cfg.paths.work_dir = g.work_dir;
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.gnn.seed = *g.seed;
  }
  return cfg;
}

std::shared_ptr<gdp::Embedder> make_embedder(const gdp::PipelineConfig& cfg) {
  gdp::EmbedderOptions eo;
  if (cfg.embeddings.cache_dir) eo.cache_dir = *cfg.embeddings.cache_dir;
  std::shared_ptr<gdp::EmbeddingProvider> provider;
  if (cfg.embeddings.provider == "http")
    provider = std::make_shared<gdp::HttpEmbeddingProvider>(cfg.embeddings.endpoint, cfg.embeddings.model,
                                                            cfg.embeddings.dimension);
  else
    provider = std::make_shared<gdp::HashEmbeddingProvider>(cfg.embeddings.dimension, cfg.embeddings.seed);
  return std::make_shared<gdp::Embedder>(provider, eo);
}

std::unique_ptr<gdp::LlmBackend> make_llm(const std::string& backend, const gdp::LlmSection& s) {
  if (backend == "mock") return std::make_unique<gdp::MockLlm>();
  if (backend == "http-chat") return std::make_unique<gdp::HttpChatBackend>(s.endpoint, gdp::LlmParams{s.model, s.temperature, s.top_p});
  throw gdp::ConfigError("unknown LLM backend '" + backend + "'");
}

gdp::Runtime make_runtime(const gdp::PipelineConfig& cfg) {
  gdp::Runtime rt;
  rt.embedder = make_embedder(cfg);
  if (cfg.classifier.backend == "embedding-mlp")
    rt.classifier = gdp::load_classifier(*cfg.classifier.checkpoint, rt.embedder);
  else
    rt.classifier = std::make_shared<gdp::CosineClassifier>(rt.embedder);
  const auto llm = cfg.llm;
  rt.make_llm = [llm] { return make_llm(llm.backend, llm); };
  return rt;
}

void print_run(const gdp::RunResult& r, gdp::Stage stage) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "executed: " << gdp::text::join(r.executed, ", ") << "\n";
  if (!r.skipped.empty()) std::cerr << "reused:   " << gdp::text::join(r.skipped, ", ") << "\n";
  std::cout << (r.dir / (std::string(gdp::stage_name(stage)) + ".json")).string() << "\n";
}

std::vector<std::size_t> parse_sequence(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = gdp::text::trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw gdp::SchemaError("not an integer: " + item);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gdp - turn long documents into attributed slide decks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--work-dir", g.work_dir, "Directory for intermediate artifacts");
  app.add_option("--seed", g.seed, "Seed for GNN training and clustering");

  // Pipeline stage commands share --doc and a few overrides.
  struct StageCmd {
    CLI::App* cmd;
    gdp::Stage stage;
  };
  std::string doc_path;
  std::vector<std::string> doc_paths;
  std::optional<double> alpha;
  std::optional<std::size_t> k, epochs;
  std::string out_path;
  std::size_t workers = 0;

  std::vector<StageCmd> stage_cmds;
  auto add_stage = [&](const char* name, const char* desc, gdp::Stage stage) {
    auto* c = app.add_subcommand(name, desc);
    c->add_option("--doc", doc_path, "Document file (JSON)")->required()->check(CLI::ExistingFile);
    if (stage >= gdp::Stage::graph) c->add_option("--alpha", alpha, "Edge probability threshold");
    if (stage >= gdp::Stage::embed) c->add_option("--epochs", epochs, "GNN training epochs");
    if (stage >= gdp::Stage::cluster) c->add_option("--k", k, "Number of slides");
    if (stage >= gdp::Stage::generate) c->add_option("--out", out_path, "Copy the presentation here");
    stage_cmds.push_back({c, stage});
  };
  add_stage("ingest", "Load a document into the work directory", gdp::Stage::ingest);
  add_stage("score-pairs", "Score every paragraph pair", gdp::Stage::pairs);
  add_stage("build-graph", "Build the paragraph graph", gdp::Stage::graph);
  add_stage("embed", "Train the graph encoder and write node embeddings", gdp::Stage::embed);
  add_stage("cluster", "Cluster paragraphs into ordered slide groups", gdp::Stage::cluster);
  add_stage("generate", "Generate the slides of the plan", gdp::Stage::generate);

  auto* run = app.add_subcommand("run", "Run the whole pipeline for one or more documents");
  run->add_option("--doc", doc_paths, "Document file(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--alpha", alpha, "Edge probability threshold");
  run->add_option("--epochs", epochs, "GNN training epochs");
  run->add_option("--k", k, "Number of slides");
  run->add_option("--out", out_path, "Copy the presentation here (single document only)");
  run->add_option("--workers", workers, "Concurrent documents");

  auto* synth = app.add_subcommand("synthesize-dataset", "Build the paragraph-pair classification dataset");
  std::string corpus_dir, data_out;
  std::size_t negatives = 10;
  std::optional<std::size_t> max_train, max_eval;
  synth->add_option("--corpus", corpus_dir, "Directory of <name>.doc.json / <name>.pres.json pairs")->required();
  synth->add_option("--out", data_out, "Output JSONL file")->required();
  synth->add_option("--negatives", negatives, "Negative partners per paragraph");
  synth->add_option("--max-train", max_train, "Subsample the train split to at most N examples");
  synth->add_option("--max-eval", max_eval, "Subsample validation and test splits to at most N examples each");

  auto* train = app.add_subcommand("train-classifier", "Train the pair classifier");
  std::string data_path, ckpt_dir, train_corpus;
  gdp::TrainConfig tc;
  bool grid = false;
  train->add_option("--data", data_path, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--corpus", train_corpus, "Corpus directory the dataset was built from")->required();
  train->add_option("--out", ckpt_dir, "Checkpoint directory")->required();
  train->add_option("--epochs", tc.epochs, "Training epochs");
  train->add_option("--lr", tc.learning_rate, "Learning rate");
  train->add_option("--dropout", tc.dropout, "Dropout");
  train->add_option("--batch-size", tc.batch_size, "Batch size");
  train->add_option("--hidden", tc.hidden, "Hidden units");
  train->add_flag("--grid", grid, "Grid-search learning rate and dropout on the validation split");

  auto* eval = app.add_subcommand("evaluate", "Score generated presentations");
  std::vector<std::string> pres_paths, eval_docs, ref_paths;
  std::string judge, report_out, ppl_scorer;
  std::size_t judge_samples = 10;
  double ppl_vocab = 50257;
  eval->add_option("--pres", pres_paths, "Generated presentation(s)")->required()->check(CLI::ExistingFile);
  eval->add_option("--doc", eval_docs, "Source document(s), one per presentation")->required()->check(CLI::ExistingFile);
  eval->add_option("--ref", ref_paths, "Reference presentation(s), one per presentation")->check(CLI::ExistingFile);
  eval->add_option("--judge", judge, "LLM judge backend (mock or http-chat)");
  eval->add_option("--judge-samples", judge_samples, "Judge generations per deck");
  eval->add_option("--ppl-scorer", ppl_scorer, "Perplexity scorer (uniform)");
  eval->add_option("--ppl-vocab", ppl_vocab, "Vocabulary size for the uniform scorer");
  eval->add_option("--out", report_out, "Write the report here instead of stdout");

  auto* nl = app.add_subcommand("nonlinearity", "Non-linearity of a deck's attribution sequence");
  std::string nl_pres, nl_seq;
  auto* nl_p = nl->add_option("--pres", nl_pres, "Presentation with attribution")->check(CLI::ExistingFile);
  auto* nl_s = nl->add_option("--seq", nl_seq, "Comma-separated paragraph indices");
  nl_p->excludes(nl_s);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& sc : stage_cmds) {
      if (!sc.cmd->parsed()) continue;
      auto cfg = load_config(g);
      if (alpha) cfg.alpha = *alpha;
      if (epochs) cfg.gnn.epochs = *epochs;
      if (k) cfg.k = *k;
      const auto r = gdp::run_pipeline(doc_path, cfg, make_runtime(cfg), sc.stage);
      if (sc.stage == gdp::Stage::generate && !out_path.empty())
        gdp::detail::write_file(out_path, gdp::presentation_file_bytes(r));
      print_run(r, sc.stage);
      return 0;
    }

    if (run->parsed()) {
      auto cfg = load_config(g);
      if (alpha) cfg.alpha = *alpha;
      if (epochs) cfg.gnn.epochs = *epochs;
      if (k) cfg.k = *k;
      if (workers) cfg.workers = workers;
      const auto rt = make_runtime(cfg);
      if (doc_paths.size() == 1) {
        const auto r = gdp::run_pipeline(doc_paths.front(), cfg, rt);
        if (!out_path.empty()) gdp::detail::write_file(out_path, gdp::presentation_file_bytes(r));
        print_run(r, gdp::Stage::generate);
        return 0;
      }
      if (!out_path.empty()) throw gdp::ConfigError("--out needs exactly one --doc");
      std::vector<fs::path> docs(doc_paths.begin(), doc_paths.end());
      int failures = 0;
      for (const auto& item : gdp::run_batch(docs, cfg, rt)) {
        if (item.result) {
          std::cout << (item.result->dir / "generate.json").string() << "\n";
        } else {
          std::cerr << item.doc.string() << ": " << item.error << "\n";
          ++failures;
        }
      }
      return failures ? 1 : 0;
    }

    if (synth->parsed()) {
      auto cfg = load_config(g);
      const auto corpus = gdp::load_corpus(corpus_dir);
      auto embedder = make_embedder(cfg);
      gdp::PairSynthesisOptions po{negatives, g.seed.value_or(0)};
      auto splits = gdp::synthesize_splits(corpus, *embedder, po);
      if (max_train) splits.train = gdp::subsample(splits.train, *max_train, po.seed);
      if (max_eval) {
        splits.validation = gdp::subsample(splits.validation, *max_eval, po.seed);
        splits.test = gdp::subsample(splits.test, *max_eval, po.seed);
      }
      gdp::detail::write_file(data_out, gdp::dataset_to_jsonl({&splits.train, &splits.validation, &splits.test}));
      for (auto* ds : {&splits.train, &splits.validation, &splits.test})
        std::cerr << gdp::to_string(ds->split) << ": " << ds->count(gdp::PairLabel::positive) << " positive, "
                  << ds->count(gdp::PairLabel::negative) << " negative\n";
      return 0;
    }

    if (train->parsed()) {
      auto cfg = load_config(g);
      tc.seed = g.seed.value_or(0);
      const auto bytes = gdp::detail::read_file(data_path);
      auto splits = gdp::dataset_from_jsonl(bytes);
      std::map<std::string, gdp::Document> docs;
      for (auto& e : gdp::load_corpus(train_corpus)) docs.emplace(e.document.doc_id, std::move(e.document));
      auto embedder = make_embedder(cfg);
      std::unique_ptr<gdp::MlpPairClassifier> clf;
      if (grid) {
        if (splits.validation.examples.empty()) throw gdp::InsufficientData("--grid needs a validation split");
        auto res = gdp::grid_search(splits.train, splits.validation, docs, embedder, tc);
        tc = res.best;
        clf = std::move(res.classifier);
        std::cerr << "best: lr " << tc.learning_rate << ", dropout " << tc.dropout << " (validation F1 "
                  << res.validation.f1 << ")\n";
      } else {
        clf = gdp::train_classifier(splits.train, docs, embedder, tc);
      }
      gdp::save_classifier(*clf, tc, gdp::sha256_hex(bytes), ckpt_dir);
      if (!splits.test.examples.empty()) {
        const auto s = gdp::evaluate_classifier(*clf, gdp::embed_pairs(splits.test, docs, *embedder));
        std::cerr << "test: accuracy " << 100.0 * s.accuracy << "%, F1 " << s.f1 << "\n";
      }
      std::cout << ckpt_dir << "\n";
      return 0;
    }

    if (eval->parsed()) {
      auto cfg = load_config(g);
      if (eval_docs.size() != pres_paths.size()) throw gdp::ConfigError("evaluate: give one --doc per --pres");
      if (!ref_paths.empty() && ref_paths.size() != pres_paths.size())
        throw gdp::ConfigError("evaluate: give one --ref per --pres");
      auto embedder = make_embedder(cfg);
      std::unique_ptr<gdp::LlmBackend> judge_backend;
      if (!judge.empty()) judge_backend = make_llm(judge, cfg.llm);
      std::unique_ptr<gdp::TokenLogprobScorer> scorer;
      if (ppl_scorer == "uniform") scorer = std::make_unique<gdp::UniformScorer>(ppl_vocab);
      else if (!ppl_scorer.empty()) throw gdp::ConfigError("unknown perplexity scorer '" + ppl_scorer + "'");

      std::vector<gdp::MetricReport> reports;
      for (std::size_t i = 0; i < pres_paths.size(); ++i) {
        const auto doc = gdp::load_document(eval_docs[i]);
        const auto pres = gdp::presentation_from_json(
            gdp::detail::parse_json(gdp::detail::read_file(pres_paths[i]), pres_paths[i]));
        std::optional<gdp::ReferencePresentation> ref;
        if (!ref_paths.empty()) ref = gdp::load_reference_presentation(ref_paths[i]);
        gdp::EvaluationInputs in;
        in.document = &doc;
        in.presentation = &pres;
        in.reference = ref ? &*ref : nullptr;
        in.embedder = embedder.get();
        in.scorer = scorer.get();
        in.judge = judge_backend.get();
        in.judge_samples = judge_samples;
        reports.push_back(gdp::evaluate_presentation(in));
      }
      json out;
      if (reports.size() == 1) {
        out = gdp::report_to_json(reports.front());
      } else {
        out["reports"] = json::array();
        for (const auto& r : reports) out["reports"].push_back(gdp::report_to_json(r));
        out["macro_average"] = gdp::macro_average(reports);
      }
      const auto text = out.dump(2) + "\n";
      if (report_out.empty()) std::cout << text;
      else gdp::detail::write_file(report_out, text);
      return 0;
    }

    if (nl->parsed()) {
      std::vector<std::size_t> seq;
      if (!nl_pres.empty())
        seq = gdp::attribution_sequence(gdp::presentation_from_json(
            gdp::detail::parse_json(gdp::detail::read_file(nl_pres), nl_pres)));
      else if (!nl_seq.empty())
        seq = parse_sequence(nl_seq);
      else
        throw gdp::ConfigError("nonlinearity: give --pres or --seq");
      std::cout << json{{"nonlinearity", gdp::nonlinearity(seq)}, {"length", seq.size()}}.dump() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
