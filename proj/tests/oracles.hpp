#pragma once

// Reference implementations used only by tests. Each one follows the
// defining formula directly and shares no code with the library path it
// checks.

#include <Eigen/Dense>

#include <cctype>
#include <cstdint>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace gdp::oracle {

/// O(n^2) inversion count.
inline std::size_t brute_inversions(const std::vector<std::size_t>& s) {
  std::size_t c = 0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b)
      if (s[a] > s[b]) ++c;
  return c;
}

inline double brute_nonlinearity(const std::vector<std::size_t>& s) {
  const double n = static_cast<double>(s.size());
  return 100.0 * static_cast<double>(brute_inversions(s)) / (n * (n - 1) / 2);
}

/// Lowercase ASCII-alnum tokenizer written independently of the library.
inline std::vector<std::string> naive_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (word) {
      cur += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct NaiveRouge {
  double recall, precision, f1;
};

/// Clipped unigram overlap by consuming matching reference tokens one at a
/// time.
inline NaiveRouge naive_rouge1(const std::string& gen, const std::string& ref) {
  auto g = naive_tokens(gen), r = naive_tokens(ref);
  std::vector<bool> used(r.size(), false);
  double overlap = 0;
  for (const auto& t : g)
    for (std::size_t k = 0; k < r.size(); ++k)
      if (!used[k] && r[k] == t) {
        used[k] = true;
        ++overlap;
        break;
      }
  NaiveRouge out{};
  out.recall = 100.0 * overlap / static_cast<double>(r.size());
  out.precision = 100.0 * overlap / static_cast<double>(g.size());
  out.f1 = overlap > 0 ? 2 * out.recall * out.precision / (out.recall + out.precision) : 0.0;
  return out;
}

/// Dense GCN forward pass with explicit loops: builds A + I, degrees, the
/// normalized matrix entry by entry, and both layers by triple loops.
inline Eigen::MatrixXd dense_gcn(const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::size_t n,
                                 const Eigen::MatrixXd& x, const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
  for (auto [i, j] : edges) a[i][j] = a[j][i] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  std::vector<std::vector<double>> ah(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ah[i][j] = a[i][j] / std::sqrt(deg[i] * deg[j]);
  auto layer = [&](const Eigen::MatrixXd& in, const Eigen::MatrixXd& w) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), w.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          for (Eigen::Index f = 0; f < in.cols(); ++f) s += ah[i][j] * in(static_cast<Eigen::Index>(j), f) * w(f, c);
        out(static_cast<Eigen::Index>(i), c) = s > 0.0 ? s : 0.0;
      }
    return out;
  };
  return layer(layer(x, w0), w1);
}

/// Per-edge summation of the link loss with the same [-30, 30] logit clamp.
inline double direct_link_loss(const Eigen::MatrixXd& z, const std::vector<std::pair<std::size_t, std::size_t>>& pos,
                               const std::vector<std::pair<std::size_t, std::size_t>>& neg) {
  double loss = 0.0;
  auto logit = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) s += z(static_cast<Eigen::Index>(i), c) * z(static_cast<Eigen::Index>(j), c);
    return std::fmin(30.0, std::fmax(-30.0, s));
  };
  for (auto [i, j] : pos) loss += std::log1p(std::exp(-logit(i, j)));
  for (auto [i, j] : neg) loss += std::log1p(std::exp(logit(i, j)));
  return loss;
}

/// Central finite-difference gradient of `f` at `z`.
template <class F>
Eigen::MatrixXd finite_difference(const F& f, Eigen::MatrixXd z, double h = 1e-5) {
  Eigen::MatrixXd g(z.rows(), z.cols());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double orig = z.data()[k];
    z.data()[k] = orig + h;
    const double up = f(z);
    z.data()[k] = orig - h;
    const double down = f(z);
    z.data()[k] = orig;
    g.data()[k] = (up - down) / (2 * h);
  }
  return g;
}

/// FNV-1a-64 and the hash-provider rule, recomputed from their definitions.
inline std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace gdp::oracle
