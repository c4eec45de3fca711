#include "fashionrec/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fashionrec/error.hpp"
#include "fashionrec/hashing.hpp"
#include "fashionrec/jsonl.hpp"
#include "http_util.hpp"

namespace fashionrec {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kInput, "embedding must have dim >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInput, "embedding contains a non-finite value");
  }
}

double EmbeddingVector::norm() const noexcept {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine of vectors with dims " +
                                                   std::to_string(a.dim()) + " and " +
                                                   std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroNorm, "cosine of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

EmbeddingVector item_feature(const EmbeddingVector& image, const EmbeddingVector& text) {
  if (image.dim() != text.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "image and text embeddings differ in dim");
  }
  std::vector<double> out(image.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (image[i] + text[i]) / 2.0;
  return EmbeddingVector(std::move(out));
}

EmbeddingVector mock_embed(std::string_view seed, std::size_t dim) {
  if (dim < 2) throw Error(ErrorCode::kInput, "mock_embed requires dim >= 2");
  std::uint64_t state = fnv1a64(seed);
  std::vector<double> values(dim);
  double sum = 0.0;
  for (auto& v : values) {
    const double unit = static_cast<double>(splitmix64_next(state) >> 11) * 0x1.0p-53;
    v = 2.0 * unit - 1.0;
    sum += v * v;
  }
  const double norm = std::sqrt(sum);
  for (auto& v : values) v /= norm;
  return EmbeddingVector(std::move(values));
}

const char* to_string(EmbedKind kind) { return kind == EmbedKind::kText ? "text" : "image"; }

void EmbedderConfig::validate() const {
  if (dim < 2) throw Error(ErrorCode::kConfig, "embedding dim must be >= 2");
  if (backend == EmbedBackend::kRemote && (!endpoint || endpoint->empty())) {
    throw Error(ErrorCode::kConfig, "remote embedding backend requires an endpoint");
  }
}

EmbeddingVector Embedder::embed_text(const std::string& text) const {
  if (text.empty()) throw Error(ErrorCode::kInput, "cannot embed empty text");
  return embed(EmbedKind::kText, text);
}

EmbeddingVector Embedder::embed_image(const std::string& image_ref) const {
  if (image_ref.empty()) throw Error(ErrorCode::kInput, "cannot embed empty image reference");
  return embed(EmbedKind::kImage, image_ref);
}

MockEmbedder::MockEmbedder(std::size_t dim) : dim_(dim) {
  if (dim < 2) throw Error(ErrorCode::kConfig, "mock embedder requires dim >= 2");
}

std::string MockEmbedder::backend_id() const { return "mock-" + std::to_string(dim_); }

EmbeddingVector MockEmbedder::embed(EmbedKind, const std::string& payload) const {
  return mock_embed(payload, dim_);
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::size_t dim,
                               std::filesystem::path image_root)
    : endpoint_(std::move(endpoint)), dim_(dim), image_root_(std::move(image_root)) {}

std::string RemoteEmbedder::backend_id() const { return "remote:" + endpoint_; }

namespace {

bool is_url(const std::string& ref) {
  return ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0;
}

}  // namespace

EmbeddingVector RemoteEmbedder::embed(EmbedKind kind, const std::string& payload) const {
  Json body{{"kind", to_string(kind)}};
  if (kind == EmbedKind::kImage && !is_url(payload)) {
    std::filesystem::path path(payload);
    if (path.is_relative() && !image_root_.empty()) path = image_root_ / path;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
      throw Error(ErrorCode::kInput, "image file not found: " + path.string());
    }
    body["payload"] = base64_encode(read_file(path));
    body["encoding"] = "base64";
  } else {
    body["payload"] = payload;
  }

  const std::string raw = detail::post_json(endpoint_, "/embed", body);
  Json reply = Json::parse(raw, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("values") ||
      !reply["values"].is_array()) {
    throw ParseError("remote embedder returned an unparseable body", raw);
  }
  std::vector<double> values;
  try {
    values = reply["values"].get<std::vector<double>>();
  } catch (const Json::exception&) {
    throw ParseError("remote embedder returned non-numeric values", raw);
  }
  const std::size_t reported = reply.value("dim", values.size());
  if (reported != values.size() || values.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "remote embedder returned dim " + std::to_string(values.size()) +
                    ", configured " + std::to_string(dim_));
  }
  return EmbeddingVector(std::move(values));
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<const Embedder> inner,
                                 std::filesystem::path cache_path)
    : inner_(std::move(inner)), cache_path_(std::move(cache_path)) {
  std::error_code ec;
  if (!std::filesystem::exists(cache_path_, ec)) return;
  for_each_jsonl(cache_path_, [&](const Json& row, std::size_t line) {
    try {
      auto values = row.at("values").get<std::vector<double>>();
      if (values.size() != row.at("dim").get<std::size_t>()) {
        throw Error(ErrorCode::kParse, "dim does not match values");
      }
      entries_.insert_or_assign(row.at("key").get<std::string>(), EmbeddingVector(std::move(values)));
    } catch (const std::exception& e) {
      throw ParseError(cache_path_.string() + ":" + std::to_string(line) + ": bad cache row (" +
                           e.what() + ")",
                       row.dump(), line);
    }
  });
}

std::string CachingEmbedder::cache_key(const std::string& backend_id, EmbedKind kind,
                                       const std::string& payload) {
  return backend_id + "|" + to_string(kind) + "|" + payload;
}

EmbeddingVector CachingEmbedder::embed(EmbedKind kind, const std::string& payload) const {
  const std::string key = cache_key(inner_->backend_id(), kind, payload);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  EmbeddingVector value = inner_->embed(kind, payload);
  if (value.dim() != inner_->dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding dim differs from configured dim");
  }

  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(key, value);
  Json row{{"key", key}, {"dim", value.dim()}};
  row["values"] = std::vector<double>(value.values().begin(), value.values().end());
  if (cache_path_.has_parent_path()) std::filesystem::create_directories(cache_path_.parent_path());
  std::ofstream out(cache_path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kInput, "cannot append to cache " + cache_path_.string());
  out << row.dump() << '\n';
  return value;
}

std::size_t CachingEmbedder::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::shared_ptr<const Embedder> make_embedder(const EmbedderConfig& config) {
  config.validate();
  std::shared_ptr<const Embedder> base;
  if (config.backend == EmbedBackend::kMock) {
    base = std::make_shared<MockEmbedder>(config.dim);
  } else {
    base = std::make_shared<RemoteEmbedder>(*config.endpoint, config.dim, config.image_root);
  }
  if (config.cache_path) return std::make_shared<CachingEmbedder>(base, *config.cache_path);
  return base;
}

ItemFeatures::ItemFeatures(std::shared_ptr<const Embedder> embedder)
    : embedder_(std::move(embedder)) {}

const EmbeddingVector& ItemFeatures::of(const Item& item) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(item.id); it != cache_.end()) return *it->second;
  }
  auto feature = std::make_unique<EmbeddingVector>(
      item_feature(embedder_->embed_image(item.image_ref), embedder_->embed_text(item.description)));
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.try_emplace(item.id, std::move(feature));
  return *it->second;
}

}  // namespace fashionrec
