#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdp/dataset.hpp"
#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/random.hpp"

namespace gdp {

/// Estimates the probability that two paragraphs of one document belong on
/// the same slide.
class PairClassifier {
 public:
  virtual ~PairClassifier() = default;

  virtual std::string name() const = 0;

  /// Backend score for the ordered pair (a, b), in (0, 1).
  virtual double score(const Paragraph& a, const Paragraph& b) = 0;

  /// Served probability: mean of the two ordered scores, so it is exactly
  /// symmetric.
  double pair_probability(const Paragraph& a, const Paragraph& b) {
    if (a.text.empty() || b.text.empty()) throw BackendError("pair_probability: empty paragraph text");
    return 0.5 * (score(a, b) + score(b, a));
  }

  /// Symmetric n x n matrix of pair probabilities; the diagonal is 0.
  virtual Eigen::MatrixXd probability_matrix(const Document& doc) {
    const auto n = static_cast<Eigen::Index>(doc.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        p(i, j) = p(j, i) = pair_probability(doc.paragraphs[static_cast<std::size_t>(i)],
                                             doc.paragraphs[static_cast<std::size_t>(j)]);
    return p;
  }
};

/// Training-free classifier: p = (cosine(e_a, e_b) + 1) / 2, clamped to
/// [1e-6, 1 - 1e-6] so the output stays inside (0, 1).
class CosineClassifier final : public PairClassifier {
 public:
  static constexpr double kEdge = 1e-6;

  explicit CosineClassifier(std::shared_ptr<Embedder> embedder) : embedder_(std::move(embedder)) {}

  std::string name() const override { return "cosine-fallback"; }

  static double from_cosine(double c) { return std::clamp((c + 1.0) / 2.0, kEdge, 1.0 - kEdge); }

  double score(const Paragraph& a, const Paragraph& b) override {
    const auto v = embedder_->embed_texts({a.text, b.text});
    return from_cosine(cosine(v[0], v[1]));
  }

  Eigen::MatrixXd probability_matrix(const Document& doc) override {
    std::vector<std::string> texts;
    for (const auto& p : doc.paragraphs) texts.push_back(p.text);
    const auto v = embedder_->embed_texts(texts);
    const auto n = static_cast<Eigen::Index>(doc.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        p(i, j) = p(j, i) = from_cosine(cosine(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]));
    return p;
  }

 private:
  std::shared_ptr<Embedder> embedder_;
};

struct TrainConfig {
  std::size_t batch_size = 12;
  double learning_rate = 1e-5;
  double dropout = 0.4;
  std::size_t epochs = 10;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0 || epochs == 0 || hidden == 0)
      throw ConfigError("classifier: batch_size, epochs and hidden must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("classifier: learning_rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("classifier: dropout must lie in [0, 1)");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"dropout", c.dropout},
          {"epochs", c.epochs},         {"hidden", c.hidden},               {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.dropout = j.value("dropout", c.dropout);
  c.epochs = j.value("epochs", c.epochs);
  c.hidden = j.value("hidden", c.hidden);
  c.seed = j.value("seed", c.seed);
  return c;
}

/// One labelled pair of embeddings.
struct EmbeddedPair {
  EmbeddingVector a;
  EmbeddingVector b;
  bool positive = false;
};

struct ClassifierScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Pair features: [a * b, |a - b|] (element-wise). Both halves are symmetric
/// in (a, b).
inline Eigen::VectorXd pair_features(const EmbeddingVector& a, const EmbeddingVector& b) {
  Eigen::VectorXd x(a.size() * 2);
  x.head(a.size()) = a.cwiseProduct(b);
  x.tail(a.size()) = (a - b).cwiseAbs();
  return x;
}

/// Single-hidden-layer perceptron head over pair features with a sigmoid
/// output.
class MlpPairModel {
 public:
  MlpPairModel() = default;
  MlpPairModel(std::size_t input, std::size_t hidden, Rng& rng)
      : w1_(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input)),
        b1_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden))),
        w2_(static_cast<Eigen::Index>(hidden)),
        b2_(0.0) {
    const double l1 = std::sqrt(6.0 / static_cast<double>(input + hidden));
    for (Eigen::Index k = 0; k < w1_.size(); ++k) w1_.data()[k] = rng.uniform(-l1, l1);
    const double l2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (Eigen::Index k = 0; k < w2_.size(); ++k) w2_[k] = rng.uniform(-l2, l2);
  }

  std::size_t input_size() const { return static_cast<std::size_t>(w1_.cols()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(w1_.rows()); }

  double predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd h = (w1_ * x + b1_).cwiseMax(0.0);
    return sigmoid(w2_.dot(h) + b2_);
  }

  static double sigmoid(double z) {
    z = std::clamp(z, -30.0, 30.0);
    return 1.0 / (1.0 + std::exp(-z));
  }

  /// Weighted binary cross-entropy training with Adam and inverted dropout
  /// on the hidden layer.
  void fit(const std::vector<Eigen::VectorXd>& xs, const std::vector<bool>& ys,
           const TrainConfig& cfg, Rng& rng) {
    const double n = static_cast<double>(ys.size());
    const double n_pos = static_cast<double>(std::count(ys.begin(), ys.end(), true));
    const double w_pos = n / (2.0 * n_pos), w_neg = n / (2.0 * (n - n_pos));

    Adam a_w1(w1_.size()), a_b1(b1_.size()), a_w2(w2_.size()), a_b2(1);
    std::vector<std::size_t> order(ys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double keep = 1.0 - cfg.dropout;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        Eigen::MatrixXd g_w1 = Eigen::MatrixXd::Zero(w1_.rows(), w1_.cols());
        Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(b1_.size());
        Eigen::VectorXd g_w2 = Eigen::VectorXd::Zero(w2_.size());
        double g_b2 = 0.0;
        for (std::size_t k = start; k < end; ++k) {
          const auto& x = xs[order[k]];
          const bool y = ys[order[k]];
          const Eigen::VectorXd pre = w1_ * x + b1_;
          Eigen::VectorXd mask(pre.size());
          for (Eigen::Index u = 0; u < mask.size(); ++u)
            mask[u] = (cfg.dropout > 0.0 && rng.uniform() >= keep) ? 0.0 : 1.0 / keep;
          const Eigen::VectorXd h = pre.cwiseMax(0.0).cwiseProduct(mask);
          const double p = sigmoid(w2_.dot(h) + b2_);
          // d/dz of weighted BCE with sigmoid output.
          const double dz = (y ? w_pos : w_neg) * (p - (y ? 1.0 : 0.0));
          g_w2 += dz * h;
          g_b2 += dz;
          Eigen::VectorXd dh = dz * w2_;
          for (Eigen::Index u = 0; u < dh.size(); ++u)
            dh[u] = pre[u] > 0.0 ? dh[u] * mask[u] : 0.0;
          g_w1.noalias() += dh * x.transpose();
          g_b1 += dh;
        }
        const double inv = 1.0 / static_cast<double>(end - start);
        a_w1.step(w1_.data(), (g_w1 * inv).eval().data(), cfg.learning_rate);
        a_b1.step(b1_.data(), (g_b1 * inv).eval().data(), cfg.learning_rate);
        a_w2.step(w2_.data(), (g_w2 * inv).eval().data(), cfg.learning_rate);
        double gb2 = g_b2 * inv;
        a_b2.step(&b2_, &gb2, cfg.learning_rate);
      }
    }
  }

  nlohmann::json to_json() const {
    auto mat = [](const auto& m) {
      return std::vector<double>(m.data(), m.data() + m.size());
    };
    return {{"rows", w1_.rows()}, {"cols", w1_.cols()}, {"w1", mat(w1_)},
            {"b1", mat(b1_)},     {"w2", mat(w2_)},     {"b2", b2_}};
  }

  static MlpPairModel from_json(const nlohmann::json& j) {
    MlpPairModel m;
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    auto w1 = j.at("w1").get<std::vector<double>>();
    auto b1 = j.at("b1").get<std::vector<double>>();
    auto w2 = j.at("w2").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w1.size()) != rows * cols ||
        static_cast<Eigen::Index>(b1.size()) != rows || static_cast<Eigen::Index>(w2.size()) != rows)
      throw SchemaError("classifier weights: inconsistent shapes");
    m.w1_ = Eigen::Map<Eigen::MatrixXd>(w1.data(), rows, cols);
    m.b1_ = Eigen::Map<Eigen::VectorXd>(b1.data(), rows);
    m.w2_ = Eigen::Map<Eigen::VectorXd>(w2.data(), rows);
    m.b2_ = j.at("b2").get<double>();
    return m;
  }

 private:
  struct Adam {
    explicit Adam(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
    void step(double* param, const double* grad, double lr) {
      ++t;
      const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
      for (Eigen::Index k = 0; k < m.size(); ++k) {
        m[k] = 0.9 * m[k] + 0.1 * grad[k];
        v[k] = 0.999 * v[k] + 0.001 * grad[k] * grad[k];
        param[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + 1e-8);
      }
    }
    Eigen::VectorXd m, v;
    double t = 0;
  };

  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::VectorXd w2_;
  double b2_ = 0.0;
};

/// Trainable classifier over provider embeddings.
class MlpPairClassifier final : public PairClassifier {
 public:
  MlpPairClassifier(std::shared_ptr<Embedder> embedder, MlpPairModel model)
      : embedder_(std::move(embedder)), model_(std::move(model)) {}

  std::string name() const override { return "embedding-mlp"; }

  double score(const Paragraph& a, const Paragraph& b) override {
    const auto v = embedder_->embed_texts({a.text, b.text});
    return score_embeddings(v[0], v[1]);
  }

  double score_embeddings(const EmbeddingVector& a, const EmbeddingVector& b) const {
    return model_.predict(pair_features(a, b));
  }

  double probability_embeddings(const EmbeddingVector& a, const EmbeddingVector& b) const {
    return 0.5 * (score_embeddings(a, b) + score_embeddings(b, a));
  }

  Eigen::MatrixXd probability_matrix(const Document& doc) override {
    std::vector<std::string> texts;
    for (const auto& p : doc.paragraphs) texts.push_back(p.text);
    const auto v = embedder_->embed_texts(texts);
    const auto n = static_cast<Eigen::Index>(doc.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        p(i, j) = p(j, i) =
            probability_embeddings(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    return p;
  }

  const MlpPairModel& model() const noexcept { return model_; }
  const Embedder& embedder() const noexcept { return *embedder_; }

 private:
  std::shared_ptr<Embedder> embedder_;
  MlpPairModel model_;
};

/// Fits the head on labelled embedding pairs. Both labels must be present.
inline MlpPairModel train_pair_model(const std::vector<EmbeddedPair>& pairs, const TrainConfig& cfg) {
  cfg.validate();
  std::size_t pos = 0;
  for (const auto& p : pairs) pos += p.positive ? 1 : 0;
  if (pos == 0 || pos == pairs.size())
    throw InsufficientData("train_classifier: both positive and negative examples are required");
  std::vector<Eigen::VectorXd> xs;
  std::vector<bool> ys;
  for (const auto& p : pairs) {
    xs.push_back(pair_features(p.a, p.b));
    ys.push_back(p.positive);
  }
  Rng rng(derive_seed(cfg.seed, "classifier"));
  MlpPairModel model(static_cast<std::size_t>(xs.front().size()), cfg.hidden, rng);
  model.fit(xs, ys, cfg, rng);
  return model;
}

inline ClassifierScores score_predictions(const std::vector<double>& probs,
                                          const std::vector<bool>& labels) {
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const bool pred = probs[k] >= 0.5;
    if (pred && labels[k]) ++tp;
    else if (pred) ++fp;
    else if (labels[k]) ++fn;
    else ++tn;
  }
  ClassifierScores s;
  const double n = tp + fp + tn + fn;
  s.accuracy = n > 0 ? (tp + tn) / n : 0.0;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

/// Resolves a pair dataset to embedding pairs using the documents it was
/// built from.
inline std::vector<EmbeddedPair> embed_pairs(const PairDataset& ds,
                                             const std::map<std::string, Document>& docs,
                                             Embedder& embedder) {
  std::vector<EmbeddedPair> out;
  out.reserve(ds.examples.size());
  std::map<std::string, std::vector<EmbeddingVector>> cache;
  for (const auto& e : ds.examples) {
    auto it = docs.find(e.doc_id);
    if (it == docs.end()) throw InsufficientData("dataset references unknown document " + e.doc_id);
    auto& vecs = cache[e.doc_id];
    if (vecs.empty()) {
      std::vector<std::string> texts;
      for (const auto& p : it->second.paragraphs) texts.push_back(p.text);
      vecs = embedder.embed_texts(texts);
    }
    if (e.j >= vecs.size()) throw SchemaError("dataset pair out of range for " + e.doc_id);
    out.push_back({vecs[e.i], vecs[e.j], e.label == PairLabel::positive});
  }
  return out;
}

inline ClassifierScores evaluate_classifier(const MlpPairClassifier& clf,
                                            const std::vector<EmbeddedPair>& pairs) {
  std::vector<double> probs;
  std::vector<bool> labels;
  for (const auto& p : pairs) {
    probs.push_back(clf.probability_embeddings(p.a, p.b));
    labels.push_back(p.positive);
  }
  return score_predictions(probs, labels);
}

inline std::unique_ptr<MlpPairClassifier> train_classifier(const PairDataset& dataset,
                                                           const std::map<std::string, Document>& docs,
                                                           std::shared_ptr<Embedder> embedder,
                                                           const TrainConfig& cfg) {
  auto pairs = embed_pairs(dataset, docs, *embedder);
  auto model = train_pair_model(pairs, cfg);
  return std::make_unique<MlpPairClassifier>(std::move(embedder), std::move(model));
}

struct GridSearchSpace {
  std::vector<double> learning_rates{1e-5, 1e-4, 1e-3};
  std::vector<double> dropouts{0.0, 0.2, 0.4};
};

struct GridSearchResult {
  TrainConfig best;
  ClassifierScores validation;
  std::unique_ptr<MlpPairClassifier> classifier;
};

/// Exhaustive search over learning rate x dropout; selection by validation
/// F1, then accuracy, then earlier grid position.
inline GridSearchResult grid_search(const PairDataset& train, const PairDataset& validation,
                                    const std::map<std::string, Document>& docs,
                                    std::shared_ptr<Embedder> embedder, const TrainConfig& base,
                                    const GridSearchSpace& space = {}) {
  const auto train_pairs = embed_pairs(train, docs, *embedder);
  const auto val_pairs = embed_pairs(validation, docs, *embedder);
  GridSearchResult best;
  bool have = false;
  for (double lr : space.learning_rates)
    for (double dr : space.dropouts) {
      TrainConfig cfg = base;
      cfg.learning_rate = lr;
      cfg.dropout = dr;
      auto clf = std::make_unique<MlpPairClassifier>(embedder, train_pair_model(train_pairs, cfg));
      const auto s = evaluate_classifier(*clf, val_pairs);
      if (!have || s.f1 > best.validation.f1 ||
          (s.f1 == best.validation.f1 && s.accuracy > best.validation.accuracy)) {
        best.best = cfg;
        best.validation = s;
        best.classifier = std::move(clf);
        have = true;
      }
    }
  return best;
}

inline constexpr int kClassifierFormatVersion = 1;
inline constexpr const char* kPairSerialization =
    "features=[e_a*e_b, |e_a-e_b|] over provider embeddings of paragraph text; "
    "served probability = mean of (a,b) and (b,a) scores";

/// Writes `classifier.meta` and `weights.json` into `dir`.
inline void save_classifier(const MlpPairClassifier& clf, const TrainConfig& cfg,
                            const std::string& dataset_hash, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"backend", clf.name()},
                      {"version", kClassifierFormatVersion},
                      {"provider", clf.embedder().name()},
                      {"dimension", clf.embedder().dimension()},
                      {"training_config", to_json(cfg)},
                      {"dataset_hash", dataset_hash},
                      {"pair_serialization", kPairSerialization}};
  detail::write_file(dir / "classifier.meta", meta.dump(2) + "\n");
  detail::write_file(dir / "weights.json", clf.model().to_json().dump() + "\n");
}

inline std::unique_ptr<PairClassifier> load_classifier(const std::filesystem::path& dir,
                                                       std::shared_ptr<Embedder> embedder) {
  const auto meta = detail::parse_json(detail::read_file(dir / "classifier.meta"), "classifier.meta");
  const auto backend = detail::require_string(meta, "backend", "classifier.meta");
  if (backend == "cosine-fallback") return std::make_unique<CosineClassifier>(std::move(embedder));
  if (backend != "embedding-mlp") throw BackendError("unknown classifier backend '" + backend + "'");
  if (meta.value("version", 0) != kClassifierFormatVersion)
    throw BackendError("unsupported classifier checkpoint version");
  if (meta.value("provider", std::string()) != embedder->name())
    throw BackendError("checkpoint was trained with provider '" + meta.value("provider", std::string()) +
                       "', not '" + embedder->name() + "'");
  auto model = MlpPairModel::from_json(
      detail::parse_json(detail::read_file(dir / "weights.json"), "weights.json"));
  if (model.input_size() != 2 * embedder->dimension())
    throw BackendError("checkpoint input size does not match provider dimension");
  return std::make_unique<MlpPairClassifier>(std::move(embedder), std::move(model));
}

}  // namespace gdp
