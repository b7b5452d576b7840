#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/generation.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/llm.hpp"
#include "gdp/prompts.hpp"
#include "gdp/text.hpp"

namespace gdp {

/// Percentages in [0, 100].
struct Rouge1 {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

/// Unigram overlap with clipped counts over text::tokenize tokens.
inline Rouge1 rouge1(const std::string& generated, const std::string& reference) {
  const auto gen = text::tokenize(generated), ref = text::tokenize(reference);
  if (gen.empty() || ref.empty()) throw EmptyText("rouge1: no tokens in generated or reference text");
  std::map<std::string, std::size_t> gc, rc;
  for (const auto& t : gen) ++gc[t];
  for (const auto& t : ref) ++rc[t];
  std::size_t overlap = 0;
  for (const auto& [tok, c] : gc)
    if (auto it = rc.find(tok); it != rc.end()) overlap += std::min(c, it->second);
  Rouge1 r;
  r.recall = 100.0 * static_cast<double>(overlap) / static_cast<double>(ref.size());
  r.precision = 100.0 * static_cast<double>(overlap) / static_cast<double>(gen.size());
  r.f1 = overlap ? 2.0 * r.recall * r.precision / (r.recall + r.precision) : 0.0;
  return r;
}

/// Mean pairwise cosine between document units and presentation units, x100.
inline double coverage(const std::vector<std::string>& doc_units, const std::vector<std::string>& pres_units,
                       Embedder& embedder) {
  if (doc_units.empty() || pres_units.empty()) throw EmptyUnits("coverage: empty unit list");
  const auto d = embedder.embed_texts(doc_units);
  const auto p = embedder.embed_texts(pres_units);
  double sum = 0.0;
  for (const auto& a : d)
    for (const auto& b : p) sum += cosine(a, b);
  return 100.0 * sum / (static_cast<double>(d.size()) * static_cast<double>(p.size()));
}

/// Paragraphs against whole slides (title + bullets).
inline double paragraph_coverage(const Document& doc, const GeneratedPresentation& pres, Embedder& embedder) {
  std::vector<std::string> d, p;
  for (const auto& para : doc.paragraphs) d.push_back(para.text);
  for (const auto& s : pres.slides) {
    auto t = text::trim(slide_text(s));
    if (!t.empty()) p.push_back(std::move(t));
  }
  return coverage(d, p, embedder);
}

/// Document sentences against individual bullets.
inline double sentence_coverage(const Document& doc, const GeneratedPresentation& pres, Embedder& embedder) {
  std::vector<std::string> d, p;
  for (const auto& para : doc.paragraphs)
    for (auto& s : text::split_sentences(para.text)) d.push_back(std::move(s));
  for (const auto& s : pres.slides)
    for (const auto& b : s.bullets) {
      auto t = text::trim(b);
      if (!t.empty()) p.push_back(std::move(t));
    }
  return coverage(d, p, embedder);
}

/// Slide attributions (ascending within a slide) concatenated in slide order.
inline std::vector<std::size_t> attribution_sequence(const GeneratedPresentation& pres) {
  std::vector<std::size_t> seq;
  for (const auto& s : pres.slides) {
    auto a = s.attribution;
    std::sort(a.begin(), a.end());
    seq.insert(seq.end(), a.begin(), a.end());
  }
  return seq;
}

namespace detail {
inline std::uint64_t count_inversions(std::vector<std::size_t>& v, std::vector<std::size_t>& buf, std::size_t lo,
                                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}
}  // namespace detail

/// Number of position pairs a < b with seq[a] > seq[b].
inline std::uint64_t inversion_count(std::vector<std::size_t> seq) {
  std::vector<std::size_t> buf(seq.size());
  return detail::count_inversions(seq, buf, 0, seq.size());
}

/// 100 * inversions / C(|S|, 2).
inline double nonlinearity(const std::vector<std::size_t>& seq) {
  if (seq.size() < 2) throw TooShort("nonlinearity: at least two indices are required");
  if (std::set<std::size_t>(seq.begin(), seq.end()).size() != seq.size())
    throw DuplicateIndices("nonlinearity: paragraph indices repeat across slides");
  const double n = static_cast<double>(seq.size());
  return 100.0 * static_cast<double>(inversion_count(seq)) / (n * (n - 1.0) / 2.0);
}

/// Per-token natural-log probabilities for a text.
class TokenLogprobScorer {
 public:
  virtual ~TokenLogprobScorer() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> token_logprobs(const std::string& text) = 0;
};

/// Assigns probability 1/V to every token of text::tokenize.
class UniformScorer final : public TokenLogprobScorer {
 public:
  explicit UniformScorer(double vocab_size) : v_(vocab_size) {}
  std::string name() const override { return "uniform"; }
  std::vector<double> token_logprobs(const std::string& t) override {
    return std::vector<double>(text::tokenize(t).size(), -std::log(v_));
  }

 private:
  double v_;
};

/// exp(-mean token log-likelihood).
inline double perplexity(const std::string& text, TokenLogprobScorer* scorer) {
  if (!scorer) throw ScorerUnavailable("perplexity: no scorer configured");
  if (text::trim(text).empty()) throw EmptyText("perplexity: empty text");
  const auto lp = scorer->token_logprobs(text);
  if (lp.empty()) throw EmptyText("perplexity: scorer produced no tokens");
  double sum = 0.0;
  for (double x : lp) sum += x;
  return std::exp(-sum / static_cast<double>(lp.size()));
}

inline std::string render_judge_prompt(const GeneratedPresentation& pres) {
  return prompts::substitute(std::string(prompts::kJudgeTemplate), prompts::kPresentationPlaceholder,
                             deck_text(pres));
}

/// First integer token of the response whose value lies in [0, 10].
inline std::optional<int> parse_judge_score(const std::string& response) {
  std::size_t i = 0;
  while (i < response.size()) {
    if (!std::isdigit(static_cast<unsigned char>(response[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < response.size() && std::isdigit(static_cast<unsigned char>(response[j]))) ++j;
    const auto tok = response.substr(i, j - i);
    if (tok.size() <= 2) {
      const int v = std::stoi(tok);
      if (v <= 10) return v;
    }
    i = j;
  }
  return std::nullopt;
}

struct JudgeScore {
  double score = 0.0;
  std::size_t parsed_count = 0;
  std::size_t samples = 0;
};

/// Mean of the parsable judge scores over `samples` generations.
inline JudgeScore geval_score(const GeneratedPresentation& pres, LlmBackend& backend, std::size_t samples = 10) {
  const auto responses = backend.generate_n(render_judge_prompt(pres), samples);
  JudgeScore out;
  out.samples = responses.size();
  double sum = 0.0;
  for (const auto& r : responses)
    if (auto v = parse_judge_score(r)) {
      sum += *v;
      ++out.parsed_count;
    }
  if (out.parsed_count == 0) throw AllSamplesUnparseable("geval: no sample contained a score in [0, 10]");
  out.score = sum / static_cast<double>(out.parsed_count);
  return out;
}

struct MetricReport {
  std::string doc_id;
  std::optional<Rouge1> rouge1;
  double coverage_paragraph = 0.0;
  double coverage_sentence = 0.0;
  std::optional<double> nonlinearity;
  std::optional<double> perplexity;
  std::optional<JudgeScore> geval;
};

struct EvaluationInputs {
  const Document* document = nullptr;
  const GeneratedPresentation* presentation = nullptr;
  const ReferencePresentation* reference = nullptr;  // optional
  Embedder* embedder = nullptr;
  TokenLogprobScorer* scorer = nullptr;  // optional
  LlmBackend* judge = nullptr;           // optional
  std::size_t judge_samples = 10;
};

inline std::string reference_text(const ReferencePresentation& ref) {
  std::vector<std::string> parts;
  for (const auto& s : ref.slides) {
    std::vector<std::string> lines;
    if (!s.title.empty()) lines.push_back(s.title);
    if (!s.body_text.empty()) lines.push_back(s.body_text);
    parts.push_back(text::join(lines, "\n"));
  }
  return text::join(parts, "\n\n");
}

/// Runs every metric whose inputs are available. Non-linearity is absent
/// when the deck carries no attribution.
inline MetricReport evaluate_presentation(const EvaluationInputs& in) {
  if (!in.document || !in.presentation || !in.embedder) throw Error("evaluate: document, presentation and embedder are required");
  MetricReport r;
  r.doc_id = in.presentation->doc_id;
  const auto deck = deck_text(*in.presentation);
  if (in.reference) r.rouge1 = rouge1(deck, reference_text(*in.reference));
  r.coverage_paragraph = paragraph_coverage(*in.document, *in.presentation, *in.embedder);
  r.coverage_sentence = sentence_coverage(*in.document, *in.presentation, *in.embedder);
  const auto seq = attribution_sequence(*in.presentation);
  if (seq.size() >= 2) r.nonlinearity = nonlinearity(seq);
  if (in.scorer) r.perplexity = perplexity(deck, in.scorer);
  if (in.judge) r.geval = geval_score(*in.presentation, *in.judge, in.judge_samples);
  return r;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  using nlohmann::json;
  json j;
  j["doc_id"] = r.doc_id;
  j["rouge1"] = r.rouge1 ? json{{"recall", r.rouge1->recall}, {"precision", r.rouge1->precision}, {"f1", r.rouge1->f1}}
                         : json(nullptr);
  j["coverage"] = {{"paragraph", r.coverage_paragraph}, {"sentence", r.coverage_sentence}};
  j["nonlinearity"] = r.nonlinearity ? json(*r.nonlinearity) : json(nullptr);
  j["ppl"] = r.perplexity ? json(*r.perplexity) : json(nullptr);
  j["geval"] = r.geval ? json(r.geval->score) : json(nullptr);
  if (r.geval) j["geval_detail"] = {{"parsed_count", r.geval->parsed_count}, {"samples", r.geval->samples}};
  return j;
}

/// Unweighted mean over documents of every metric; a metric absent for some
/// documents is averaged over the documents that have it.
inline nlohmann::json macro_average(const std::vector<MetricReport>& reports) {
  using nlohmann::json;
  auto mean = [&](auto getter) -> json {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports)
      if (auto v = getter(r)) {
        sum += *v;
        ++n;
      }
    return n ? json(sum / static_cast<double>(n)) : json(nullptr);
  };
  using opt = std::optional<double>;
  json j;
  j["averaging"] = "macro";
  j["documents"] = reports.size();
  const bool any_rouge = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.rouge1.has_value(); });
  j["rouge1"] = any_rouge ? json{{"recall", mean([](const MetricReport& r) { return r.rouge1 ? opt(r.rouge1->recall) : opt(); })},
                                 {"precision", mean([](const MetricReport& r) { return r.rouge1 ? opt(r.rouge1->precision) : opt(); })},
                                 {"f1", mean([](const MetricReport& r) { return r.rouge1 ? opt(r.rouge1->f1) : opt(); })}}
                          : json(nullptr);
  j["coverage"] = {{"paragraph", mean([](const MetricReport& r) { return opt(r.coverage_paragraph); })},
                   {"sentence", mean([](const MetricReport& r) { return opt(r.coverage_sentence); })}};
  j["nonlinearity"] = mean([](const MetricReport& r) { return r.nonlinearity; });
  j["ppl"] = mean([](const MetricReport& r) { return r.perplexity; });
  j["geval"] = mean([](const MetricReport& r) { return r.geval ? opt(r.geval->score) : opt(); });
  return j;
}

}  // namespace gdp
