#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdp/errors.hpp"
#include "gdp/hash.hpp"
#include "gdp/text.hpp"

namespace gdp {

using EmbeddingVector = Eigen::VectorXd;

/// Maps text to fixed-dimension vectors. Implementations must be
/// deterministic: the same text always yields the same vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;

  /// One vector per input, order aligned. Throws ProviderError on backend
  /// failure.
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
};

/// Offline provider: signed feature hashing of lowercased word tokens.
///
/// For every token t of text::tokenize(text), h = FNV-1a-64 over the 8
/// little-endian bytes of `seed` followed by the bytes of t; component
/// h % dim receives +1 if the top bit of h is clear and -1 otherwise. The
/// accumulated vector is L2 normalized. A text with no tokens (or whose
/// contributions cancel) is hashed as a single token equal to its raw bytes;
/// if that too is empty, component 0 is set to 1.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = 64, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {
    if (dim == 0) throw ProviderError("hash provider: dimension must be positive");
  }

  std::string name() const override {
    return "mock-hash-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
  }
  std::size_t dimension() const override { return dim_; }

  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  EmbeddingVector embed_one(const std::string& s) const {
    EmbeddingVector v = EmbeddingVector::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& tok : text::tokenize(s)) add_token(v, tok);
    if (v.squaredNorm() == 0.0 && !s.empty()) add_token(v, s);
    if (v.squaredNorm() == 0.0) v[0] = 1.0;
    return v / v.norm();
  }

 private:
  void add_token(EmbeddingVector& v, const std::string& tok) const {
    std::string buf(8, '\0');
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((seed_ >> (8 * i)) & 0xff);
    buf += tok;
    const std::uint64_t h = fnv1a64(buf);
    const auto idx = static_cast<Eigen::Index>(h % dim_);
    v[idx] += (h >> 63) ? -1.0 : 1.0;
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

/// Content-addressed on-disk vector store. One file per key, named
/// sha256(provider_name + '\0' + text), holding the raw little-endian
/// float64 components.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  static std::string key(const std::string& provider_name, const std::string& text) {
    std::string buf = provider_name;
    buf.push_back('\0');
    buf += text;
    return sha256_hex(buf);
  }

  std::filesystem::path path_for(const std::string& key) const { return dir_ / key; }

  std::optional<EmbeddingVector> get(const std::string& key, std::size_t dim) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != dim * sizeof(double)) return std::nullopt;
    EmbeddingVector v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = decode(&bytes[8 * i]);
    return v;
  }

  /// Writes through a temporary file and renames it into place, so
  /// concurrent writers of one key leave exactly one complete file.
  void put(const std::string& key, const EmbeddingVector& v) const {
    std::string bytes(static_cast<std::size_t>(v.size()) * sizeof(double), '\0');
    for (Eigen::Index i = 0; i < v.size(); ++i) encode(v[i], &bytes[8 * static_cast<std::size_t>(i)]);
    static std::atomic<std::uint64_t> counter{0};
    const auto tmp = dir_ / (key + ".tmp." + std::to_string(counter++) + "." +
                             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("embedding cache: cannot write " + tmp.string());
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw IoError("embedding cache: write failed " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path_for(key), ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw IoError("embedding cache: rename failed for " + key);
    }
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  static void encode(double d, char* out) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  static double decode(const char* in) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(in[i])) << (8 * i);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }

  std::filesystem::path dir_;
};

struct EmbedderOptions {
  std::optional<std::filesystem::path> cache_dir;
  std::size_t batch_size = 32;
  int max_retries = 3;
};

/// Provider front end with an in-memory layer, an optional on-disk cache,
/// batching and bounded retries. Safe to call concurrently.
class Embedder {
 public:
  explicit Embedder(std::shared_ptr<EmbeddingProvider> provider, EmbedderOptions opts = {})
      : provider_(std::move(provider)), opts_(std::move(opts)) {
    if (!provider_) throw ProviderError("embedder: null provider");
    if (opts_.cache_dir) disk_.emplace(*opts_.cache_dir);
  }

  const EmbeddingProvider& provider() const noexcept { return *provider_; }
  std::string name() const { return provider_->name(); }
  std::size_t dimension() const { return provider_->dimension(); }

  /// Number of texts actually sent to the provider so far.
  std::size_t provider_calls() const noexcept { return provider_texts_.load(); }

  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) {
    const auto pname = provider_->name();
    const auto dim = provider_->dimension();
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> missing;
    std::unordered_map<std::string, std::vector<std::size_t>> slots;

    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].empty()) throw EmptyInput("embed_texts: empty text at position " + std::to_string(i));
      const auto k = EmbeddingCache::key(pname, texts[i]);
      if (auto hit = lookup(k, dim)) {
        out[i] = std::move(*hit);
        continue;
      }
      auto& s = slots[k];
      if (s.empty()) missing.push_back(texts[i]);
      s.push_back(i);
    }

    for (std::size_t b = 0; b < missing.size(); b += opts_.batch_size) {
      const auto e = std::min(missing.size(), b + opts_.batch_size);
      std::vector<std::string> batch(missing.begin() + static_cast<std::ptrdiff_t>(b),
                                     missing.begin() + static_cast<std::ptrdiff_t>(e));
      auto vecs = call_with_retries(batch);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (static_cast<std::size_t>(vecs[i].size()) != dim)
          throw ProviderError("provider returned a vector of the wrong dimension");
        if (!vecs[i].allFinite()) throw ProviderError("provider returned non-finite values");
        const auto k = EmbeddingCache::key(pname, batch[i]);
        store(k, vecs[i]);
        for (auto slot : slots[k]) out[slot] = vecs[i];
      }
    }
    return out;
  }

  EmbeddingVector embed(const std::string& text) { return embed_texts({text}).front(); }

 private:
  std::optional<EmbeddingVector> lookup(const std::string& key, std::size_t dim) {
    {
      std::lock_guard lock(mu_);
      if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (disk_) {
      if (auto v = disk_->get(key, dim)) {
        std::lock_guard lock(mu_);
        memory_.emplace(key, *v);
        return v;
      }
    }
    return std::nullopt;
  }

  void store(const std::string& key, const EmbeddingVector& v) {
    if (disk_) disk_->put(key, v);
    std::lock_guard lock(mu_);
    memory_.emplace(key, v);
  }

  std::vector<EmbeddingVector> call_with_retries(const std::vector<std::string>& batch) {
    for (int attempt = 0;; ++attempt) {
      try {
        provider_texts_ += batch.size();
        auto v = provider_->embed_batch(batch);
        if (v.size() != batch.size()) throw ProviderError("provider returned wrong batch size");
        return v;
      } catch (const ProviderError&) {
        if (attempt >= opts_.max_retries) throw;
      }
    }
  }

  std::shared_ptr<EmbeddingProvider> provider_;
  EmbedderOptions opts_;
  std::optional<EmbeddingCache> disk_;
  std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> memory_;
  std::atomic<std::size_t> provider_texts_{0};
};

/// u.v / (|u| |v|), clamped to [-1, 1].
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.size() != v.size())
    throw DimensionMismatch("cosine: dimensions " + std::to_string(u.size()) + " and " +
                            std::to_string(v.size()));
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine: zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

}  // namespace gdp
