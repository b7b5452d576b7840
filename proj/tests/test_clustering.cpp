#include <gtest/gtest.h>

#include "gdp/clustering.hpp"
#include "support.hpp"

using namespace gdp;

namespace {
// Three tight groups in 3-D along the axes.
Eigen::MatrixXd three_groups(std::uint64_t seed, std::vector<std::size_t>* truth) {
  Rng rng(seed);
  Eigen::MatrixXd z(12, 3);
  for (Eigen::Index i = 0; i < 12; ++i) {
    const auto g = static_cast<Eigen::Index>((i * 7) % 3);  // interleaved order
    for (Eigen::Index c = 0; c < 3; ++c) z(i, c) = (c == g ? 1.0 : 0.0) + 0.05 * rng.normal();
    if (truth) truth->push_back(static_cast<std::size_t>(g));
  }
  return z;
}

std::vector<std::size_t> labels_of(const std::vector<Cluster>& cs, std::size_t n) {
  std::vector<std::size_t> l(n);
  for (std::size_t k = 0; k < cs.size(); ++k)
    for (auto v : cs[k]) l[v] = k;
  return l;
}
}  // namespace

TEST(Ari, HandValues) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  // contingency [[1,1],[1,1]]: index 0, expected 0.5*... -> -0.5
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}), -0.5, 1e-12);
  EXPECT_THROW(adjusted_rand_index({0}, {0, 1}), DimensionMismatch);
}

TEST(Affinity, ClippedCosineWithUnitDiagonal) {
  Eigen::MatrixXd z(3, 2);
  z << 1, 0, 0, 1, -1, 0;
  const auto s = cosine_affinity(z);
  EXPECT_EQ(s(0, 0), 1.0);
  EXPECT_EQ(s(0, 1), 0.0);
  EXPECT_EQ(s(0, 2), 0.0);  // cosine -1 clipped
  EXPECT_TRUE(s.isApprox(s.transpose()));
}

TEST(Spectral, RecoversSeparatedGroups) {
  std::vector<std::size_t> truth;
  const auto z = three_groups(1, &truth);
  std::vector<std::size_t> ids(12);
  for (std::size_t i = 0; i < 12; ++i) ids[i] = i;
  const auto cs = spectral_cluster(z, ids, 3, 0);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(labels_of(cs, 12), truth), 1.0);
}

TEST(Spectral, PartitionPropertiesAndDeterminism) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + rng.below(15);
    const std::size_t k = 1 + rng.below(n);
    Eigen::MatrixXd z(Eigen::Index(n), 4);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = std::abs(rng.normal());
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(10 + 2 * i);
    const auto cs = spectral_cluster(z, ids, k, 3);
    EXPECT_EQ(cs, spectral_cluster(z, ids, k, 3));
    ASSERT_EQ(cs.size(), k);
    const auto plan = order_clusters(cs, "d");
    EXPECT_EQ(plan.nodes(), ids);
    for (std::size_t s = 1; s < plan.k(); ++s)
      EXPECT_LT(plan.ordered_clusters[s - 1].front(), plan.ordered_clusters[s].front());
  }
}

TEST(Spectral, KEqualsNodeCountGivesSingletons) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(4, 4);
  const auto plan = order_clusters(spectral_cluster(z, {3, 5, 7, 9}, 4, 0));
  EXPECT_EQ(plan.ordered_clusters, (std::vector<Cluster>{{3}, {5}, {7}, {9}}));
}

TEST(Spectral, Errors) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(spectral_cluster(z, {0, 1, 2}, 4, 0), TooFewNodes);
  EXPECT_THROW(spectral_cluster(z, {0, 1, 2}, 0, 0), TooFewNodes);
}

TEST(KMeans, NoEmptyClustersOnDuplicatePoints) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 2);
  x(4, 0) = 1.0;
  const auto r = kmeans(x, 3, 0);
  std::vector<std::size_t> count(3, 0);
  for (auto l : r.labels) ++count[l];
  for (auto c : count) EXPECT_GT(c, 0u);
}

TEST(Order, SortsByMinimumAndValidates) {
  const auto plan = order_clusters({{7, 2}, {0, 9}, {4}}, "d");
  EXPECT_EQ(plan.ordered_clusters, (std::vector<Cluster>{{0, 9}, {2, 7}, {4}}));
  EXPECT_NEAR(plan.size_variance(), 2.0 / 9.0, 1e-15);
  EXPECT_THROW(order_clusters({{1, 2}, {2, 3}}), OverlappingClusters);
  EXPECT_THROW(order_clusters({{1}, {}}), EmptyCluster);
}

TEST(Plan, JsonRoundTrip) {
  const auto plan = order_clusters({{1, 3}, {0}, {2}}, "doc");
  const auto back = plan_from_json(nlohmann::json::parse(plan_to_json(plan).dump()));
  EXPECT_EQ(back.ordered_clusters, plan.ordered_clusters);
  EXPECT_EQ(back.doc_id, "doc");
  auto bad = plan_to_json(plan);
  bad["K"] = 5;
  EXPECT_THROW(plan_from_json(bad), SchemaError);
}
