#include <gtest/gtest.h>

#include "gdp/classifier.hpp"
#include "support.hpp"

using namespace gdp;
using gdp::testing::make_document;
using gdp::testing::separable_pairs;
using gdp::testing::temp_dir;

namespace {
std::shared_ptr<Embedder> hash_embedder(std::size_t dim = 32) {
  return std::make_shared<Embedder>(std::make_shared<HashEmbeddingProvider>(dim, 0));
}
}  // namespace

TEST(CosineClassifier, SymmetricMatrixInUnitInterval) {
  CosineClassifier clf(hash_embedder());
  const auto doc = make_document("d", {"graph neural network", "network of graphs", "cooking pasta", "x"});
  const auto p = clf.probability_matrix(doc);
  ASSERT_EQ(p.rows(), 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_EQ(p(i, i), 0.0);
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_EQ(p(i, j), p(j, i));
      if (i != j) {
        EXPECT_GT(p(i, j), 0.0);
        EXPECT_LT(p(i, j), 1.0);
      }
    }
  }
  EXPECT_NEAR(p(0, 1), clf.pair_probability(doc.paragraphs[0], doc.paragraphs[1]), 1e-15);
}

TEST(CosineClassifier, Mapping) {
  EXPECT_DOUBLE_EQ(CosineClassifier::from_cosine(0.0), 0.5);
  EXPECT_DOUBLE_EQ(CosineClassifier::from_cosine(1.0), 1.0 - 1e-6);
  EXPECT_DOUBLE_EQ(CosineClassifier::from_cosine(-1.0), 1e-6);
}

TEST(PairClassifier, EmptyTextIsBackendError) {
  CosineClassifier clf(hash_embedder());
  Paragraph a{0, "x", {}, {}}, b{1, "", {}, {}};
  EXPECT_THROW(clf.pair_probability(a, b), BackendError);
}

TEST(PairFeatures, SymmetricInArguments) {
  Eigen::VectorXd a(3), b(3);
  a << 1, -2, 3;
  b << 0.5, 4, -1;
  EXPECT_EQ(pair_features(a, b), pair_features(b, a));
  const auto f = pair_features(a, b);
  EXPECT_DOUBLE_EQ(f[1], -8.0);
  EXPECT_DOUBLE_EQ(f[4], 6.0);
}

TEST(Training, LearnsSeparablePairs) {
  const auto train = separable_pairs(400, 16, 1);
  const auto test = separable_pairs(200, 16, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.dropout = 0.0;
  cfg.epochs = 20;
  cfg.hidden = 32;
  MlpPairClassifier clf(hash_embedder(16), train_pair_model(train, cfg));
  EXPECT_GE(evaluate_classifier(clf, test).accuracy, 0.95);
}

TEST(Training, SingleLabelIsInsufficientData) {
  auto pairs = separable_pairs(10, 4, 1);
  for (auto& p : pairs) p.positive = true;
  EXPECT_THROW(train_pair_model(pairs, {}), InsufficientData);
}

TEST(Training, DeterministicForSeed) {
  const auto pairs = separable_pairs(60, 8, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  EXPECT_EQ(train_pair_model(pairs, cfg).to_json(), train_pair_model(pairs, cfg).to_json());
}

TEST(Training, ConfigValidation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rate = 1e-3;
  EXPECT_EQ(train_config_from_json(to_json(c)).learning_rate, 1e-3);
}

TEST(Scores, HandCounted) {
  // tp=2 fp=1 fn=1 tn=1
  const auto s = score_predictions({0.9, 0.6, 0.7, 0.2, 0.1}, {true, true, false, true, false});
  EXPECT_DOUBLE_EQ(s.accuracy, 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
}

TEST(Checkpoint, SaveLoadReproducesScores) {
  auto emb = hash_embedder(8);
  TrainConfig cfg;
  cfg.epochs = 1;
  MlpPairClassifier clf(emb, train_pair_model(separable_pairs(40, 8, 4), cfg));
  const auto dir = temp_dir("clf-ckpt");
  save_classifier(clf, cfg, "abc", dir);
  auto loaded = load_classifier(dir, emb);
  EXPECT_EQ(loaded->name(), "embedding-mlp");
  const auto doc = make_document("d", {"alpha beta", "gamma delta", "beta gamma"});
  EXPECT_EQ(loaded->probability_matrix(doc), clf.probability_matrix(doc));
  auto other = std::make_shared<Embedder>(std::make_shared<HashEmbeddingProvider>(8, 9));
  EXPECT_THROW(load_classifier(dir, other), BackendError);
}

TEST(Checkpoint, GridSearchPicksAConfigFromTheGrid) {
  auto emb = hash_embedder(16);
  std::map<std::string, Document> docs;
  PairDataset train, val;
  const auto doc = make_document("g", {"apple banana cherry", "banana cherry apple", "quantum flux engine",
                                       "engine flux quantum", "river stone moss", "moss stone river"});
  docs["g"] = doc;
  train.examples = {{"g", 0, 1, PairLabel::positive}, {"g", 2, 3, PairLabel::positive},
                    {"g", 0, 2, PairLabel::negative}, {"g", 1, 3, PairLabel::negative}};
  val.examples = {{"g", 4, 5, PairLabel::positive}, {"g", 0, 4, PairLabel::negative}};
  TrainConfig base;
  base.epochs = 2;
  GridSearchSpace space{{1e-4, 1e-3}, {0.0, 0.2}};
  auto r = grid_search(train, val, docs, emb, base, space);
  ASSERT_TRUE(r.classifier);
  EXPECT_TRUE(r.best.learning_rate == 1e-4 || r.best.learning_rate == 1e-3);
}
