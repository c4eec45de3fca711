#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fashionrec/types.hpp"

namespace fashionrec {

// Fixed-dimension real vector holding an image, text or item feature.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws kInput on empty or non-finite values.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double norm() const noexcept;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

// a·b / (|a||b|), clamped to [-1, 1]. Throws kDimensionMismatch or kZeroNorm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Elementwise mean of image and text embeddings; not re-normalized.
EmbeddingVector item_feature(const EmbeddingVector& image, const EmbeddingVector& text);

// Offline deterministic embedding: FNV-1a 64 of the seed string seeds a
// splitmix64 stream; each draw maps its top 53 bits to [-1, 1); the result is
// L2-normalized. Pure function of (seed, dim). dim >= 2.
EmbeddingVector mock_embed(std::string_view seed, std::size_t dim);

enum class EmbedKind { kText, kImage };
const char* to_string(EmbedKind kind);

enum class EmbedBackend { kMock, kRemote };

struct EmbedderConfig {
  std::size_t dim = 512;
  EmbedBackend backend = EmbedBackend::kMock;
  std::optional<std::string> endpoint;            // http://host:port for remote
  std::optional<std::filesystem::path> cache_path;
  // Relative image paths are resolved against this directory (remote backend).
  std::filesystem::path image_root;

  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  // Stable identifier used in cache keys.
  virtual std::string backend_id() const = 0;
  virtual EmbeddingVector embed(EmbedKind kind, const std::string& payload) const = 0;

  EmbeddingVector embed_text(const std::string& text) const;
  EmbeddingVector embed_image(const std::string& image_ref) const;
};

// Keys on the raw text or image locator, so identical strings embed identically
// regardless of kind.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 512);
  std::size_t dim() const override { return dim_; }
  std::string backend_id() const override;
  EmbeddingVector embed(EmbedKind kind, const std::string& payload) const override;

 private:
  std::size_t dim_;
};

// POST {endpoint}/embed {"kind","payload"} -> {"dim","values"}. Local image
// files are sent base64-encoded; URLs are passed through as locators.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::size_t dim, std::filesystem::path image_root = {});
  std::size_t dim() const override { return dim_; }
  std::string backend_id() const override;
  EmbeddingVector embed(EmbedKind kind, const std::string& payload) const override;

 private:
  std::string endpoint_;
  std::size_t dim_;
  std::filesystem::path image_root_;
};

// Write-through JSONL cache {"key","dim","values"} keyed by
// (backend id, kind, payload). Later lines win on load.
class CachingEmbedder final : public Embedder {
 public:
  CachingEmbedder(std::shared_ptr<const Embedder> inner, std::filesystem::path cache_path);
  std::size_t dim() const override { return inner_->dim(); }
  std::string backend_id() const override { return inner_->backend_id(); }
  EmbeddingVector embed(EmbedKind kind, const std::string& payload) const override;

  std::size_t size() const;
  static std::string cache_key(const std::string& backend_id, EmbedKind kind,
                               const std::string& payload);

 private:
  std::shared_ptr<const Embedder> inner_;
  std::filesystem::path cache_path_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, EmbeddingVector> entries_;
};

std::shared_ptr<const Embedder> make_embedder(const EmbedderConfig& config);

// Lazily computed, thread-safe item features f_j keyed by item id.
class ItemFeatures {
 public:
  explicit ItemFeatures(std::shared_ptr<const Embedder> embedder);

  const EmbeddingVector& of(const Item& item) const;
  const Embedder& embedder() const { return *embedder_; }
  std::shared_ptr<const Embedder> embedder_ptr() const { return embedder_; }

 private:
  std::shared_ptr<const Embedder> embedder_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<ItemId, std::unique_ptr<EmbeddingVector>> cache_;
};

}  // namespace fashionrec
