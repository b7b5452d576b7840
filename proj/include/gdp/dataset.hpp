#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/hash.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/random.hpp"

namespace gdp {

/// Hard similarity floor for a paragraph to count as a slide source.
inline constexpr double kSourceSimilarityFloor = 0.8;
/// Maximum number of source paragraphs kept per slide.
inline constexpr std::size_t kMaxSourcesPerSlide = 10;

struct SlideSourceSet {
  std::string doc_id;
  std::size_t slide_index = 0;
  std::set<std::size_t> paragraph_indices;
};

enum class PairLabel { positive, negative };
enum class Split { train, validation, test };

inline const char* to_string(PairLabel l) { return l == PairLabel::positive ? "pos" : "neg"; }
inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

struct PairExample {
  std::string doc_id;
  std::size_t i = 0;  // always i < j
  std::size_t j = 0;
  PairLabel label = PairLabel::negative;

  friend bool operator==(const PairExample&, const PairExample&) = default;
};

struct PairDataset {
  Split split = Split::train;
  std::vector<PairExample> examples;

  std::size_t count(PairLabel l) const {
    return static_cast<std::size_t>(std::count_if(examples.begin(), examples.end(),
                                                  [l](const auto& e) { return e.label == l; }));
  }
};

/// max(S) - std(S) / 2 with the population standard deviation.
inline double selection_threshold(const std::vector<double>& similarities) {
  if (similarities.empty()) throw EmptyInput("selection_threshold: empty similarity list");
  const double n = static_cast<double>(similarities.size());
  const double mean = std::accumulate(similarities.begin(), similarities.end(), 0.0) / n;
  double var = 0.0;
  for (double s : similarities) var += (s - mean) * (s - mean);
  var /= n;
  return *std::max_element(similarities.begin(), similarities.end()) - std::sqrt(var) / 2.0;
}

/// Source-paragraph rule over precomputed slide-to-paragraph cosines: keep
/// p with cos > theta and cos >= 0.8, then the top 10 by cosine (ties by
/// lower index).
inline std::set<std::size_t> select_by_similarity(const std::vector<double>& cosines) {
  if (cosines.empty()) return {};
  const double theta = selection_threshold(cosines);
  std::vector<std::size_t> cand;
  for (std::size_t p = 0; p < cosines.size(); ++p)
    if (cosines[p] > theta && cosines[p] >= kSourceSimilarityFloor) cand.push_back(p);
  std::stable_sort(cand.begin(), cand.end(),
                   [&](std::size_t a, std::size_t b) { return cosines[a] > cosines[b]; });
  if (cand.size() > kMaxSourcesPerSlide) cand.resize(kMaxSourcesPerSlide);
  return {cand.begin(), cand.end()};
}

inline SlideSourceSet select_source_paragraphs(const ReferenceSlide& slide, const Document& doc,
                                               Embedder& embedder) {
  if (doc.paragraphs.empty()) throw EmptyInput("select_source_paragraphs: document has no paragraphs");
  std::vector<std::string> texts;
  texts.reserve(doc.size() + 1);
  texts.push_back(slide_embedding_text(slide));
  for (const auto& p : doc.paragraphs) texts.push_back(p.text);
  const auto vecs = embedder.embed_texts(texts);
  std::vector<double> cos(doc.size());
  for (std::size_t p = 0; p < doc.size(); ++p) cos[p] = cosine(vecs[0], vecs[p + 1]);
  return {doc.doc_id, slide.index, select_by_similarity(cos)};
}

struct CorpusEntry {
  Document document;
  ReferencePresentation presentation;
};

struct PairSynthesisOptions {
  std::size_t negatives_per_paragraph = 10;
  std::uint64_t seed = 0;
};

/// Positive and negative pairs for one document given its source sets.
///
/// Positives are all unordered pairs inside each source set, deduplicated.
/// For every paragraph p that appears in a positive pair (ascending p), the
/// partners q != p that never share a source set with p are listed in
/// ascending order and up to `negatives_per_paragraph` of them are drawn
/// without replacement by a partial Fisher-Yates shuffle; the generator is
/// seeded once per document with derive_seed(seed, doc_id). Negatives are
/// deduplicated. Output is positives then negatives, each sorted by (i, j).
inline std::vector<PairExample> pairs_for_document(const Document& doc,
                                                   const std::vector<SlideSourceSet>& sources,
                                                   const PairSynthesisOptions& opts) {
  const std::size_t n = doc.size();
  std::vector<std::vector<char>> together(n, std::vector<char>(n, 0));
  std::set<std::pair<std::size_t, std::size_t>> pos;
  for (const auto& s : sources) {
    std::vector<std::size_t> v(s.paragraph_indices.begin(), s.paragraph_indices.end());
    for (std::size_t a = 0; a < v.size(); ++a)
      for (std::size_t b = a + 1; b < v.size(); ++b) {
        if (v[a] >= n || v[b] >= n) throw SchemaError("source set references a missing paragraph");
        pos.emplace(v[a], v[b]);
        together[v[a]][v[b]] = together[v[b]][v[a]] = 1;
      }
  }

  std::set<std::size_t> anchors;
  for (const auto& [i, j] : pos) {
    anchors.insert(i);
    anchors.insert(j);
  }

  Rng rng(derive_seed(opts.seed, doc.doc_id));
  std::set<std::pair<std::size_t, std::size_t>> neg;
  for (std::size_t p : anchors) {
    std::vector<std::size_t> partners;
    for (std::size_t q = 0; q < n; ++q)
      if (q != p && !together[p][q]) partners.push_back(q);
    rng.sample_prefix(partners, opts.negatives_per_paragraph);
    for (std::size_t q : partners) neg.emplace(std::min(p, q), std::max(p, q));
  }

  std::vector<PairExample> out;
  out.reserve(pos.size() + neg.size());
  for (const auto& [i, j] : pos) out.push_back({doc.doc_id, i, j, PairLabel::positive});
  for (const auto& [i, j] : neg) out.push_back({doc.doc_id, i, j, PairLabel::negative});
  return out;
}

/// Source sets for every slide of a reference presentation.
inline std::vector<SlideSourceSet> source_sets(const CorpusEntry& entry, Embedder& embedder) {
  std::vector<SlideSourceSet> sets;
  sets.reserve(entry.presentation.slides.size());
  for (const auto& slide : entry.presentation.slides)
    sets.push_back(select_source_paragraphs(slide, entry.document, embedder));
  return sets;
}

/// Builds the pair dataset of a corpus. Documents are processed in doc_id
/// order; documents without positives contribute nothing.
inline PairDataset build_pair_dataset(const std::vector<CorpusEntry>& corpus, Embedder& embedder,
                                      const PairSynthesisOptions& opts, Split split = Split::train) {
  if (corpus.empty()) throw EmptyInput("build_pair_dataset: empty corpus");
  std::vector<const CorpusEntry*> order;
  for (const auto& e : corpus) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->document.doc_id < b->document.doc_id;
  });
  PairDataset ds{split, {}};
  for (const auto* e : order) {
    auto pairs = pairs_for_document(e->document, source_sets(*e, embedder), opts);
    ds.examples.insert(ds.examples.end(), pairs.begin(), pairs.end());
  }
  return ds;
}

struct SplitFractions {
  double train = 500.0 / 680.0;
  double validation = 80.0 / 680.0;
};

/// Assigns whole documents to splits: doc_ids are sorted, shuffled with
/// `seed`, then cut by the fractions (the test split takes the remainder).
inline std::map<std::string, Split> assign_splits(std::vector<std::string> doc_ids, std::uint64_t seed,
                                                  SplitFractions f = {}) {
  std::sort(doc_ids.begin(), doc_ids.end());
  doc_ids.erase(std::unique(doc_ids.begin(), doc_ids.end()), doc_ids.end());
  Rng rng(derive_seed(seed, "splits"));
  rng.shuffle(doc_ids);
  const auto n = doc_ids.size();
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = std::min(
      n - std::min(n, n_train),
      static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
  std::map<std::string, Split> out;
  for (std::size_t k = 0; k < n; ++k)
    out[doc_ids[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::validation : Split::test);
  return out;
}

struct SplitDatasets {
  PairDataset train{Split::train, {}};
  PairDataset validation{Split::validation, {}};
  PairDataset test{Split::test, {}};

  PairDataset& operator[](Split s) {
    return s == Split::train ? train : (s == Split::validation ? validation : test);
  }
};

inline SplitDatasets synthesize_splits(const std::vector<CorpusEntry>& corpus, Embedder& embedder,
                                       const PairSynthesisOptions& opts, SplitFractions f = {}) {
  if (corpus.empty()) throw EmptyInput("synthesize_splits: empty corpus");
  std::vector<std::string> ids;
  for (const auto& e : corpus) ids.push_back(e.document.doc_id);
  const auto assignment = assign_splits(ids, opts.seed, f);
  auto all = build_pair_dataset(corpus, embedder, opts);
  SplitDatasets out;
  for (auto& ex : all.examples) out[assignment.at(ex.doc_id)].examples.push_back(std::move(ex));
  return out;
}

/// Optional post-filter: keep at most `n` examples chosen uniformly with
/// `seed`, preserving their relative order.
inline PairDataset subsample(const PairDataset& ds, std::size_t n, std::uint64_t seed) {
  if (ds.examples.size() <= n) return ds;
  std::vector<std::size_t> idx(ds.examples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "subsample"));
  rng.sample_prefix(idx, n);
  std::sort(idx.begin(), idx.end());
  PairDataset out{ds.split, {}};
  for (auto k : idx) out.examples.push_back(ds.examples[k]);
  return out;
}

inline nlohmann::json pair_example_to_json(const PairExample& e) {
  return {{"doc_id", e.doc_id}, {"i", e.i}, {"j", e.j}, {"label", to_string(e.label)}};
}

/// Newline-delimited records. The optional "split" key carries the split
/// when several datasets share one file.
inline std::string dataset_to_jsonl(const std::vector<const PairDataset*>& parts) {
  std::string out;
  for (const auto* ds : parts)
    for (const auto& e : ds->examples) {
      auto j = pair_example_to_json(e);
      j["split"] = to_string(ds->split);
      out += j.dump();
      out.push_back('\n');
    }
  return out;
}

inline SplitDatasets dataset_from_jsonl(const std::string& bytes) {
  SplitDatasets out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(bytes)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no);
    auto j = detail::parse_json(line, where);
    PairExample e;
    e.doc_id = detail::require_string(j, "doc_id", where);
    const auto& i = detail::require(j, "i", where);
    const auto& jj = detail::require(j, "j", where);
    if (!i.is_number_unsigned() || !jj.is_number_unsigned())
      throw SchemaError(where + ": i and j must be non-negative integers");
    e.i = i.get<std::size_t>();
    e.j = jj.get<std::size_t>();
    if (e.i == e.j) throw SchemaError(where + ": i == j");
    if (e.i > e.j) std::swap(e.i, e.j);
    const auto label = detail::require_string(j, "label", where);
    if (label == "pos") e.label = PairLabel::positive;
    else if (label == "neg") e.label = PairLabel::negative;
    else throw SchemaError(where + ": label must be \"pos\" or \"neg\"");
    Split split = Split::train;
    if (auto s = detail::optional_string(j, "split", where)) {
      if (*s == "train") split = Split::train;
      else if (*s == "validation") split = Split::validation;
      else if (*s == "test") split = Split::test;
      else throw SchemaError(where + ": unknown split '" + *s + "'");
    }
    out[split].examples.push_back(std::move(e));
  }
  return out;
}

/// Loads a corpus directory: every `<name>.doc.json` is paired with the
/// `<name>.pres.json` next to it. Entries are returned sorted by doc_id.
inline std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::vector<CorpusEntry> corpus;
  std::vector<fs::path> docs;
  for (const auto& de : fs::directory_iterator(dir)) {
    const auto name = de.path().filename().string();
    if (name.size() > 9 && name.ends_with(".doc.json")) docs.push_back(de.path());
  }
  std::sort(docs.begin(), docs.end());
  for (const auto& dp : docs) {
    const auto stem = dp.filename().string().substr(0, dp.filename().string().size() - 9);
    const auto pp = dp.parent_path() / (stem + ".pres.json");
    if (!fs::exists(pp)) throw IoError("corpus: missing presentation for " + dp.string());
    corpus.push_back({load_document(dp), load_reference_presentation(pp)});
  }
  std::sort(corpus.begin(), corpus.end(), [](const auto& a, const auto& b) {
    return a.document.doc_id < b.document.doc_id;
  });
  return corpus;
}

}  // namespace gdp
