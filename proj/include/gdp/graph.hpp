#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
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

/// Undirected edge between two node positions, stored with first < second.
using Edge = std::pair<std::size_t, std::size_t>;

/// Paragraph graph after isolated-node pruning.
///
/// `node_ids` holds the original paragraph indices of the surviving nodes in
/// increasing order; `edges` and the rows of `features` refer to positions
/// in `node_ids`.
struct ParagraphGraph {
  std::vector<std::size_t> node_ids;
  std::vector<Edge> edges;
  Eigen::MatrixXd features;
  double alpha = 0.5;

  std::size_t num_nodes() const noexcept { return node_ids.size(); }

  Eigen::MatrixXd adjacency() const {
    const auto n = static_cast<Eigen::Index>(num_nodes());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [i, j] : edges) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
      a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
    }
    return a;
  }
};

struct GnnWeights {
  Eigen::MatrixXd w0;  // F x H
  Eigen::MatrixXd w1;  // H x F'
};

struct NodeEmbeddings {
  Eigen::MatrixXd z;  // |V| x F'
  std::vector<std::size_t> node_ids;
};

using PairProbability = std::function<double(std::size_t, std::size_t)>;

/// Edge rule and pruning only: connect i < j when prob(i, j) > alpha, then
/// drop nodes of degree zero. Features are left empty.
inline ParagraphGraph build_graph_structure(std::size_t num_paragraphs, const PairProbability& prob,
                                            double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("build_graph: alpha must lie in (0, 1)");
  if (num_paragraphs < 2) throw EmptyGraph("build_graph: at least two paragraphs are required");
  std::vector<Edge> raw;
  std::vector<char> keep(num_paragraphs, 0);
  for (std::size_t i = 0; i < num_paragraphs; ++i)
    for (std::size_t j = i + 1; j < num_paragraphs; ++j)
      if (prob(i, j) > alpha) {
        raw.emplace_back(i, j);
        keep[i] = keep[j] = 1;
      }
  if (raw.empty())
    throw EmptyGraph("build_graph: no pair probability exceeds alpha = " + std::to_string(alpha) +
                     "; lower alpha for this document");
  ParagraphGraph g;
  g.alpha = alpha;
  std::vector<std::size_t> position(num_paragraphs, 0);
  for (std::size_t p = 0; p < num_paragraphs; ++p)
    if (keep[p]) {
      position[p] = g.node_ids.size();
      g.node_ids.push_back(p);
    }
  for (const auto& [i, j] : raw) g.edges.emplace_back(position[i], position[j]);
  return g;
}

/// Full graph construction: structure from the probability matrix, features
/// from the provider embeddings of the surviving paragraphs' text.
inline ParagraphGraph build_graph(const Document& doc, const Eigen::MatrixXd& prob, double alpha,
                                  Embedder& embedder) {
  if (prob.rows() != static_cast<Eigen::Index>(doc.size()) || prob.cols() != prob.rows())
    throw DimensionMismatch("build_graph: probability matrix does not match the document");
  auto g = build_graph_structure(
      doc.size(),
      [&](std::size_t i, std::size_t j) {
        return prob(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      },
      alpha);
  std::vector<std::string> texts;
  for (auto id : g.node_ids) texts.push_back(doc.paragraphs[id].text);
  const auto vecs = embedder.embed_texts(texts);
  g.features.resize(static_cast<Eigen::Index>(vecs.size()), static_cast<Eigen::Index>(embedder.dimension()));
  for (std::size_t r = 0; r < vecs.size(); ++r) g.features.row(static_cast<Eigen::Index>(r)) = vecs[r].transpose();
  return g;
}

/// D^-1/2 (A + I) D^-1/2 where D is the degree matrix of A + I.
inline Eigen::MatrixXd normalize_adjacency(const ParagraphGraph& g) {
  Eigen::MatrixXd a = g.adjacency();
  a.diagonal().array() += 1.0;
  const Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct GcnActivations {
  Eigen::MatrixXd ax;  // Â X
  Eigen::MatrixXd h1;  // Â X W0
  Eigen::MatrixXd a1;  // ReLU(h1)
  Eigen::MatrixXd aa1; // Â a1
  Eigen::MatrixXd h2;  // Â a1 W1
  Eigen::MatrixXd z;   // ReLU(h2)
};

inline GcnActivations gcn_forward_full(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a_hat,
                                       const GnnWeights& w) {
  if (a_hat.rows() != a_hat.cols() || a_hat.rows() != x.rows())
    throw DimensionMismatch("gcn_forward: adjacency and feature rows disagree");
  if (x.cols() != w.w0.rows())
    throw DimensionMismatch("gcn_forward: feature width " + std::to_string(x.cols()) +
                            " does not match W0 rows " + std::to_string(w.w0.rows()));
  if (w.w0.cols() != w.w1.rows()) throw DimensionMismatch("gcn_forward: W0 cols != W1 rows");
  GcnActivations act;
  act.ax = a_hat * x;
  act.h1 = act.ax * w.w0;
  act.a1 = act.h1.cwiseMax(0.0);
  act.aa1 = a_hat * act.a1;
  act.h2 = act.aa1 * w.w1;
  act.z = act.h2.cwiseMax(0.0);
  return act;
}

/// Z = ReLU(Â ReLU(Â X W0) W1).
inline Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a_hat,
                                   const GnnWeights& w) {
  return gcn_forward_full(x, a_hat, w).z;
}

/// |E| non-edges drawn uniformly without replacement (capped by the number
/// available). Non-edges are enumerated in (i, j) order and sampled with a
/// partial Fisher-Yates shuffle driven by `seed`. Throws CompleteGraph when
/// the graph has no non-edge.
inline std::vector<Edge> sample_negative_edges(std::size_t num_nodes, const std::vector<Edge>& edges,
                                               std::uint64_t seed) {
  std::vector<char> is_edge(num_nodes * num_nodes, 0);
  for (const auto& [i, j] : edges) is_edge[i * num_nodes + j] = is_edge[j * num_nodes + i] = 1;
  std::vector<Edge> candidates;
  for (std::size_t i = 0; i < num_nodes; ++i)
    for (std::size_t j = i + 1; j < num_nodes; ++j)
      if (!is_edge[i * num_nodes + j]) candidates.emplace_back(i, j);
  if (candidates.empty()) throw CompleteGraph("sample_negative_edges: the graph has no non-edges");
  Rng rng(seed);
  rng.sample_prefix(candidates, edges.size());
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

inline std::vector<Edge> sample_negative_edges(const ParagraphGraph& g, std::uint64_t seed) {
  return sample_negative_edges(g.num_nodes(), g.edges, seed);
}

/// Logit clamp applied before the logarithms of the link loss.
inline constexpr double kLogitClamp = 30.0;

namespace detail {
inline double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }
// log(1 + e^x) without overflow or cancellation.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double dot_rows(const Eigen::MatrixXd& z, std::size_t i, std::size_t j) {
  return z.row(static_cast<Eigen::Index>(i)).dot(z.row(static_cast<Eigen::Index>(j)));
}
inline void check_rows(const Eigen::MatrixXd& z, const std::vector<Edge>& es) {
  for (const auto& [i, j] : es)
    if (std::max(i, j) >= static_cast<std::size_t>(z.rows()))
      throw DimensionMismatch("link_loss: edge references a node without an embedding row");
}
}  // namespace detail

/// -sum_E log sigma(z_i.z_j) - sum_En log(1 - sigma(z_i.z_j)), with each
/// logit clamped to [-30, 30].
inline double link_loss(const Eigen::MatrixXd& z, const std::vector<Edge>& pos,
                        const std::vector<Edge>& neg) {
  detail::check_rows(z, pos);
  detail::check_rows(z, neg);
  double loss = 0.0;
  for (const auto& [i, j] : pos) {
    const double s = std::clamp(detail::dot_rows(z, i, j), -kLogitClamp, kLogitClamp);
    loss += detail::softplus(-s);  // -log sigma(s)
  }
  for (const auto& [i, j] : neg) {
    const double s = std::clamp(detail::dot_rows(z, i, j), -kLogitClamp, kLogitClamp);
    loss += detail::softplus(s);
  }
  return loss;
}

/// dL/dZ. The logit derivative is sigma(s) - 1 for edges and sigma(s) for
/// non-edges, evaluated at the unclamped logit.
inline Eigen::MatrixXd link_loss_gradient(const Eigen::MatrixXd& z, const std::vector<Edge>& pos,
                                          const std::vector<Edge>& neg) {
  detail::check_rows(z, pos);
  detail::check_rows(z, neg);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  auto accumulate = [&](const std::vector<Edge>& es, double target) {
    for (const auto& [i, j] : es) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double d = detail::sigmoid(z.row(ii).dot(z.row(jj))) - target;
      g.row(ii) += d * z.row(jj);
      g.row(jj) += d * z.row(ii);
    }
  };
  accumulate(pos, 1.0);
  accumulate(neg, 0.0);
  return g;
}

struct GnnConfig {
  std::size_t hidden = 128;
  std::size_t out = 64;
  std::size_t epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

/// Glorot-uniform initialization driven by `seed`.
inline GnnWeights init_gnn_weights(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "gnn-init"));
  auto glorot = [&](std::size_t r, std::size_t c) {
    const double lim = std::sqrt(6.0 / static_cast<double>(r + c));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-lim, lim);
    return m;
  };
  GnnWeights w;
  w.w0 = glorot(in, hidden);
  w.w1 = glorot(hidden, out);
  return w;
}

/// Gradients of the link loss with respect to both weight matrices.
inline GnnWeights gcn_backward(const Eigen::MatrixXd& a_hat, const GcnActivations& act,
                               const GnnWeights& w, const Eigen::MatrixXd& grad_z) {
  const Eigen::MatrixXd d_h2 = grad_z.cwiseProduct((act.h2.array() > 0.0).cast<double>().matrix());
  GnnWeights g;
  g.w1 = act.aa1.transpose() * d_h2;
  const Eigen::MatrixXd d_a1 = a_hat.transpose() * d_h2 * w.w1.transpose();
  const Eigen::MatrixXd d_h1 = d_a1.cwiseProduct((act.h1.array() > 0.0).cast<double>().matrix());
  g.w0 = act.ax.transpose() * d_h1;
  return g;
}

struct GnnTrainResult {
  NodeEmbeddings embeddings;
  GnnWeights weights;
  /// Loss before each update, followed by the loss after the final update.
  std::vector<double> loss_trace;
  bool complete_graph = false;
};

/// Seed of the negative-edge draw for one epoch.
inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return derive_seed(derive_seed(seed, "negative-edges"), static_cast<std::uint64_t>(epoch));
}

/// Trains the encoder with Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the
/// link loss. Negative edges are redrawn every epoch; on a complete graph
/// only the positive term is used.
inline GnnTrainResult train_gnn(const ParagraphGraph& g, const GnnConfig& cfg) {
  if (g.features.rows() != static_cast<Eigen::Index>(g.num_nodes()))
    throw DimensionMismatch("train_gnn: feature rows do not match node count");
  if (cfg.hidden == 0 || cfg.out == 0) throw ConfigError("train_gnn: dimensions must be positive");
  if (!(cfg.lr > 0.0)) throw ConfigError("train_gnn: lr must be positive");

  const Eigen::MatrixXd a_hat = normalize_adjacency(g);
  GnnTrainResult res;
  res.weights = init_gnn_weights(static_cast<std::size_t>(g.features.cols()), cfg.hidden, cfg.out, cfg.seed);
  auto& w = res.weights;

  auto negatives = [&](std::size_t epoch) -> std::vector<Edge> {
    try {
      return sample_negative_edges(g, epoch_seed(cfg.seed, epoch));
    } catch (const CompleteGraph&) {
      res.complete_graph = true;
      return {};
    }
  };

  struct Moments {
    Eigen::MatrixXd m, v;
  };
  Moments m0{Eigen::MatrixXd::Zero(w.w0.rows(), w.w0.cols()), Eigen::MatrixXd::Zero(w.w0.rows(), w.w0.cols())};
  Moments m1{Eigen::MatrixXd::Zero(w.w1.rows(), w.w1.cols()), Eigen::MatrixXd::Zero(w.w1.rows(), w.w1.cols())};
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  auto adam = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& grad, Moments& mo, double t) {
    mo.m = b1 * mo.m + (1.0 - b1) * grad;
    mo.v = b2 * mo.v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    p.array() -= cfg.lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + eps);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto neg = negatives(epoch);
    const auto act = gcn_forward_full(g.features, a_hat, w);
    res.loss_trace.push_back(link_loss(act.z, g.edges, neg));
    const auto grads = gcn_backward(a_hat, act, w, link_loss_gradient(act.z, g.edges, neg));
    const double t = static_cast<double>(epoch + 1);
    adam(w.w0, grads.w0, m0, t);
    adam(w.w1, grads.w1, m1, t);
  }
  const auto z = gcn_forward(g.features, a_hat, w);
  res.loss_trace.push_back(link_loss(z, g.edges, negatives(cfg.epochs)));
  res.embeddings = {z, g.node_ids};
  return res;
}

// Artifacts.

inline nlohmann::json graph_to_json(const ParagraphGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [i, j] : g.edges) edges.push_back({g.node_ids[i], g.node_ids[j]});
  std::vector<double> feats;
  for (Eigen::Index r = 0; r < g.features.rows(); ++r)
    for (Eigen::Index c = 0; c < g.features.cols(); ++c) feats.push_back(g.features(r, c));
  return {{"node_ids", g.node_ids},
          {"edges", std::move(edges)},
          {"alpha", g.alpha},
          {"feature_dim", g.features.cols()},
          {"features", std::move(feats)}};
}

inline ParagraphGraph graph_from_json(const nlohmann::json& j) {
  ParagraphGraph g;
  try {
    g.node_ids = j.at("node_ids").get<std::vector<std::size_t>>();
    g.alpha = j.at("alpha").get<double>();
    std::vector<std::size_t> position;
    for (std::size_t k = 0; k < g.node_ids.size(); ++k) {
      if (k && g.node_ids[k] <= g.node_ids[k - 1]) throw SchemaError("graph: node_ids not increasing");
      if (g.node_ids[k] >= position.size()) position.resize(g.node_ids[k] + 1, SIZE_MAX);
      position[g.node_ids[k]] = k;
    }
    for (const auto& e : j.at("edges")) {
      const auto a = e.at(0).get<std::size_t>(), b = e.at(1).get<std::size_t>();
      if (a >= position.size() || b >= position.size() || position[a] == SIZE_MAX || position[b] == SIZE_MAX || a == b)
        throw SchemaError("graph: edge references an unknown node");
      g.edges.emplace_back(std::min(position[a], position[b]), std::max(position[a], position[b]));
    }
    if (j.contains("features")) {
      const auto dim = j.at("feature_dim").get<Eigen::Index>();
      auto f = j.at("features").get<std::vector<double>>();
      const auto rows = static_cast<Eigen::Index>(g.node_ids.size());
      if (static_cast<Eigen::Index>(f.size()) != rows * dim) throw SchemaError("graph: feature size mismatch");
      g.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(f.data(), rows, dim);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("graph artifact: ") + e.what());
  }
  return g;
}

/// node_ids plus row-major Z.
inline nlohmann::json embeddings_to_json(const NodeEmbeddings& e) {
  std::vector<double> vals;
  for (Eigen::Index r = 0; r < e.z.rows(); ++r)
    for (Eigen::Index c = 0; c < e.z.cols(); ++c) vals.push_back(e.z(r, c));
  return {{"node_ids", e.node_ids}, {"dim", e.z.cols()}, {"z", std::move(vals)}};
}

inline NodeEmbeddings embeddings_from_json(const nlohmann::json& j) {
  NodeEmbeddings e;
  try {
    e.node_ids = j.at("node_ids").get<std::vector<std::size_t>>();
    const auto dim = j.at("dim").get<Eigen::Index>();
    auto vals = j.at("z").get<std::vector<double>>();
    const auto rows = static_cast<Eigen::Index>(e.node_ids.size());
    if (static_cast<Eigen::Index>(vals.size()) != rows * dim) throw SchemaError("embeddings: size mismatch");
    e.z = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(vals.data(), rows, dim);
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError(std::string("embeddings artifact: ") + ex.what());
  }
  return e;
}

}  // namespace gdp
