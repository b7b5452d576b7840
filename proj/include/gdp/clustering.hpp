#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdp/errors.hpp"
#include "gdp/hash.hpp"
#include "gdp/random.hpp"

namespace gdp {

using Cluster = std::vector<std::size_t>;  // ascending paragraph indices

struct SlidePlan {
  std::string doc_id;
  std::vector<Cluster> ordered_clusters;

  std::size_t k() const noexcept { return ordered_clusters.size(); }

  std::vector<std::size_t> nodes() const {
    std::vector<std::size_t> all;
    for (const auto& c : ordered_clusters) all.insert(all.end(), c.begin(), c.end());
    std::sort(all.begin(), all.end());
    return all;
  }

  /// Population variance of the cluster sizes.
  double size_variance() const {
    if (ordered_clusters.empty()) return 0.0;
    double mean = 0.0;
    for (const auto& c : ordered_clusters) mean += static_cast<double>(c.size());
    mean /= static_cast<double>(k());
    double var = 0.0;
    for (const auto& c : ordered_clusters) var += std::pow(static_cast<double>(c.size()) - mean, 2);
    return var / static_cast<double>(k());
  }
};

struct KMeansResult {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
};

namespace detail {

inline std::size_t nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x, double* dist = nullptr) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (dist) *dist = bd;
  return best;
}

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  Eigen::MatrixXd c(static_cast<Eigen::Index>(k), x.cols());
  std::vector<char> chosen(n, 0);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  c.row(0) = x.row(static_cast<Eigen::Index>(first));
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t m = 1; m < k; ++m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < m; ++q)
        d = std::min(d, (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(q))).squaredNorm());
      d2[i] = d;
      total += d;
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && r < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n)
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) rest.push_back(i);
      pick = rest[static_cast<std::size_t>(rng.below(rest.size()))];
    }
    chosen[pick] = 1;
    c.row(static_cast<Eigen::Index>(m)) = x.row(static_cast<Eigen::Index>(pick));
  }
  return c;
}

inline void recompute_centroids(const Eigen::MatrixXd& x, const std::vector<std::size_t>& labels,
                                Eigen::MatrixXd& c) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(c.rows(), c.cols());
  std::vector<std::size_t> count(static_cast<std::size_t>(c.rows()), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum.row(static_cast<Eigen::Index>(labels[i])) += x.row(static_cast<Eigen::Index>(i));
    ++count[labels[i]];
  }
  for (Eigen::Index q = 0; q < c.rows(); ++q)
    if (count[static_cast<std::size_t>(q)]) c.row(q) = sum.row(q) / static_cast<double>(count[static_cast<std::size_t>(q)]);
}

/// While some cluster is empty, move the point farthest from its own
/// centroid (taken from a cluster with more than one member) into it.
inline void repair_empty_clusters(const Eigen::MatrixXd& x, std::vector<std::size_t>& labels,
                                  Eigen::MatrixXd& c) {
  const auto k = static_cast<std::size_t>(c.rows());
  for (;;) {
    std::vector<std::size_t> count(k, 0);
    for (auto l : labels) ++count[l];
    auto empty = std::find(count.begin(), count.end(), 0u);
    if (empty == count.end()) return;
    std::size_t far = labels.size();
    double fd = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (count[labels[i]] < 2) continue;
      const double d = (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(labels[i]))).squaredNorm();
      if (d > fd) {
        fd = d;
        far = i;
      }
    }
    if (far == labels.size()) throw TooFewNodes("kmeans: fewer points than clusters");
    const auto target = static_cast<std::size_t>(empty - count.begin());
    labels[far] = target;
    recompute_centroids(x, labels, c);
    c.row(static_cast<Eigen::Index>(target)) = x.row(static_cast<Eigen::Index>(far));
  }
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; the run with the lowest inertia
/// over `restarts` is kept. Every cluster of the result is non-empty.
inline KMeansResult kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed,
                           std::size_t restarts = 10, std::size_t max_iter = 300) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k == 0) throw TooFewNodes("kmeans: k must be positive");
  if (k > n) throw TooFewNodes("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
  Rng rng(derive_seed(seed, "kmeans"));
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Eigen::MatrixXd c = detail::kmeanspp_init(x, k, rng);
    std::vector<std::size_t> labels(n, 0);
    for (std::size_t it = 0; it < max_iter; ++it) {
      bool changed = it == 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto l = detail::nearest(c, x.row(static_cast<Eigen::Index>(i)));
        if (l != labels[i]) {
          labels[i] = l;
          changed = true;
        }
      }
      detail::repair_empty_clusters(x, labels, c);
      if (!changed) break;
      detail::recompute_centroids(x, labels, c);
    }
    detail::recompute_centroids(x, labels, c);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(labels[i]))).squaredNorm();
    if (inertia < best.inertia) best = {labels, c, inertia};
  }
  return best;
}

/// Affinity used for spectral clustering: max(0, cosine) between rows, 1 on
/// the diagonal. Rows with zero norm have affinity 0 to every other row.
inline Eigen::MatrixXd cosine_affinity(const Eigen::MatrixXd& z) {
  const auto n = z.rows();
  const Eigen::VectorXd norms = z.rowwise().norm();
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0)
        v = std::max(0.0, std::min(1.0, z.row(i).dot(z.row(j)) / (norms[i] * norms[j])));
      s(i, j) = s(j, i) = v;
    }
  return s;
}

/// Row-normalized top-K eigenvectors of D^-1/2 S D^-1/2.
inline Eigen::MatrixXd spectral_embedding(const Eigen::MatrixXd& affinity, std::size_t k) {
  const Eigen::VectorXd inv_sqrt = affinity.rowwise().sum().array().rsqrt();
  const Eigen::MatrixXd m = inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw Error("spectral_embedding: eigendecomposition failed");
  const auto n = m.rows();
  Eigen::MatrixXd u = es.eigenvectors().rightCols(static_cast<Eigen::Index>(k)).rowwise().reverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = u.row(i).norm();
    if (norm > 0.0) u.row(i) /= norm;
  }
  return u;
}

/// Partitions the nodes into exactly K non-empty clusters (Ng-Jordan-Weiss
/// over cosine affinities). Returns clusters of node ids, each ascending, in
/// label order.
inline std::vector<Cluster> spectral_cluster(const Eigen::MatrixXd& z, const std::vector<std::size_t>& node_ids,
                                             std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(z.rows());
  if (node_ids.size() != n) throw DimensionMismatch("spectral_cluster: node_ids do not match rows");
  if (k == 0) throw TooFewNodes("spectral_cluster: K must be at least 1");
  if (k > n) throw TooFewNodes("spectral_cluster: K = " + std::to_string(k) + " exceeds " + std::to_string(n) + " nodes");
  if (k == 1) {
    Cluster all(node_ids.begin(), node_ids.end());
    std::sort(all.begin(), all.end());
    return {all};
  }
  const auto u = spectral_embedding(cosine_affinity(z), k);
  const auto km = kmeans(u, k, seed);
  std::vector<Cluster> out(k);
  for (std::size_t i = 0; i < n; ++i) out[km.labels[i]].push_back(node_ids[i]);
  for (auto& c : out) std::sort(c.begin(), c.end());
  return out;
}

/// Sorts clusters by their minimum index. Minima of disjoint clusters are
/// distinct, so the order is unique.
inline SlidePlan order_clusters(std::vector<Cluster> clusters, std::string doc_id = {}) {
  std::set<std::size_t> seen;
  for (auto& c : clusters) {
    if (c.empty()) throw EmptyCluster("order_clusters: empty cluster");
    std::sort(c.begin(), c.end());
    for (auto v : c)
      if (!seen.insert(v).second)
        throw OverlappingClusters("order_clusters: paragraph " + std::to_string(v) + " is in two clusters");
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) { return a.front() < b.front(); });
  return {std::move(doc_id), std::move(clusters)};
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("adjusted_rand_index: label vectors differ in length");
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : table) index += choose2(v);
  for (const auto& [_, v] : ra) sa += choose2(v);
  for (const auto& [_, v] : rb) sb += choose2(v);
  const double expected = sa * sb / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

inline nlohmann::json plan_to_json(const SlidePlan& plan) {
  return {{"doc_id", plan.doc_id},
          {"K", plan.k()},
          {"clusters", plan.ordered_clusters},
          {"metadata", {{"cluster_size_variance", plan.size_variance()}}}};
}

inline SlidePlan plan_from_json(const nlohmann::json& j) {
  try {
    auto clusters = j.at("clusters").get<std::vector<Cluster>>();
    if (j.at("K").get<std::size_t>() != clusters.size()) throw SchemaError("plan: K does not match cluster count");
    auto plan = order_clusters(clusters, j.at("doc_id").get<std::string>());
    if (plan.ordered_clusters != clusters) throw SchemaError("plan: clusters are not in slide order");
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("plan artifact: ") + e.what());
  }
}

}  // namespace gdp
