#pragma once

#include <Eigen/Dense>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/classifier.hpp"
#include "gdp/graph.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/random.hpp"

namespace gdp::testing {

inline std::filesystem::path data_dir() { return GDP_TEST_DATA_DIR; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gdp-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Provider answering from a fixed text -> vector table; counts calls.
class TableProvider final : public EmbeddingProvider {
 public:
  TableProvider(std::size_t dim, std::map<std::string, EmbeddingVector> table)
      : dim_(dim), table_(std::move(table)) {}

  std::string name() const override { return "table"; }
  std::size_t dimension() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    ++batches;
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) {
      auto it = table_.find(t);
      if (it == table_.end()) throw ProviderError("table provider: unknown text '" + t + "'");
      out.push_back(it->second);
    }
    return out;
  }

  std::size_t batches = 0;

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingVector> table_;
};

inline EmbeddingVector vec(std::initializer_list<double> v) {
  EmbeddingVector e(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) e[i++] = x;
  return e;
}

/// A unit vector whose cosine with e_0 is exactly `c` (2-D).
inline EmbeddingVector at_cosine(double c) { return vec({c, std::sqrt(std::max(0.0, 1.0 - c * c))}); }

inline Document make_document(const std::string& id, const std::vector<std::string>& texts) {
  Document d;
  d.doc_id = id;
  for (std::size_t i = 0; i < texts.size(); ++i) d.paragraphs.push_back({i, texts[i], std::nullopt, std::nullopt});
  return d;
}

/// Pairs drawn from `topics` random unit directions plus Gaussian noise:
/// positives share a topic, negatives do not.
inline std::vector<EmbeddedPair> separable_pairs(std::size_t n, std::size_t dim, std::uint64_t seed,
                                                 std::size_t topics = 8, double noise = 0.15) {
  Rng rng(seed);
  auto gauss = [&](double s) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = s * rng.normal();
    return v;
  };
  std::vector<Eigen::VectorXd> centers;
  for (std::size_t t = 0; t < topics; ++t) centers.push_back(gauss(1.0).normalized());
  auto sample = [&](std::size_t t) { return Eigen::VectorXd((centers[t] + gauss(noise / std::sqrt(double(dim)))).normalized()); };
  std::vector<EmbeddedPair> out;
  for (std::size_t k = 0; k < n; ++k) {
    const bool pos = k % 2 == 0;
    const auto t = static_cast<std::size_t>(rng.below(topics));
    auto u = static_cast<std::size_t>(rng.below(topics - 1));
    if (u >= t) ++u;
    out.push_back({sample(t), sample(pos ? t : u), pos});
  }
  return out;
}

/// Two planted blocks of `n / 2` nodes: edges with probability p_in inside
/// a block and p_out across; features are the one-hot block indicator plus
/// N(0, noise^2) per component. Block of node v is v < n / 2 ? 0 : 1.
inline ParagraphGraph planted_two_block(std::uint64_t seed, std::size_t n = 20, double p_in = 0.9,
                                        double p_out = 0.05, double noise = 0.1) {
  Rng rng(seed);
  ParagraphGraph g;
  for (std::size_t v = 0; v < n; ++v) g.node_ids.push_back(v);
  auto block = [&](std::size_t v) { return v < n / 2 ? 0 : 1; };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < (block(i) == block(j) ? p_in : p_out)) g.edges.emplace_back(i, j);
  g.features.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t v = 0; v < n; ++v)
    for (Eigen::Index c = 0; c < 2; ++c)
      g.features(static_cast<Eigen::Index>(v), c) = (c == block(v) ? 1.0 : 0.0) + noise * rng.normal();
  return g;
}

}  // namespace gdp::testing
