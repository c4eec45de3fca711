#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fashionrec/catalog.hpp"
#include "fashionrec/embedding.hpp"
#include "fashionrec/jsonl.hpp"

namespace fashionrec {

struct ToolDescriptor {
  std::string name;
  std::string description;
  Json input_schema;  // JSON Schema subset: object, properties with type, required

  Json to_json() const;
};

// Checks args against the object/properties/required/type subset of JSON
// Schema. Throws kInput naming the offending field.
void check_schema(const Json& schema, const Json& args);

class ToolRegistry {
 public:
  using Handler = std::function<Json(const Json& args)>;

  // Throws kDuplicateId when the name is taken.
  void add(ToolDescriptor descriptor, Handler handler);
  std::vector<ToolDescriptor> list_tools() const;
  bool contains(const std::string& name) const { return tools_.contains(name); }
  // Throws kNotFound for an unknown tool and kInput on schema violation.
  Json call_tool(const std::string& name, const Json& args) const;

 private:
  struct Entry {
    ToolDescriptor descriptor;
    Handler handler;
  };
  std::map<std::string, Entry> tools_;
};

namespace jsonrpc {
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;
inline constexpr int kInternalError = -32603;
inline constexpr int kToolFailed = -32000;
}  // namespace jsonrpc

inline constexpr const char* kProtocolVersion = "2024-11-05";

// JSON-RPC 2.0 dispatch for initialize, tools/list and tools/call. Always
// returns a well-formed response object; notifications (no id) get an empty
// optional.
std::optional<Json> handle_jsonrpc(const ToolRegistry& registry, const Json& request);
// Raw body variant: malformed JSON yields a parse-error response with id null.
std::string handle_jsonrpc_text(const ToolRegistry& registry, const std::string& body);

// Resolves image refs against the work dir, then the catalog dir. Refs with
// ".." and absolute paths outside both roots never resolve; URLs are not fetched.
class ImageStore {
 public:
  ImageStore(std::filesystem::path work_dir, std::filesystem::path catalog_dir);

  const std::filesystem::path& work_dir() const { return work_dir_; }
  std::optional<std::filesystem::path> resolve(const std::string& ref) const;
  // Throws kInput when the ref does not resolve to a readable file.
  std::string read(const std::string& ref) const;
  // Stores uploaded bytes under uploads/ (content-addressed) and returns the ref.
  std::string save_upload(const std::string& bytes, const std::string& extension = "bin") const;
  // Writes bytes under generated/ and returns the ref.
  std::string save_generated(const std::string& name, const std::string& bytes) const;

 private:
  std::filesystem::path work_dir_;
  std::filesystem::path catalog_dir_;
};

struct RecommendContext {
  std::string query;  // assembled conversation text, preference suffix included
  std::vector<ItemId> context_items;
  std::vector<std::string> context_images;  // uploads that matched no catalog item
  std::string preference_summary;
  std::vector<std::string> categories;  // categories the user asked for
  bool replace = false;
  std::vector<ItemId> exclude;

  Json to_json() const;
  static RecommendContext from_json(const Json& args);
};

struct Recommendation {
  ItemId item_id;
  std::string category;
  std::string text;

  Json to_json() const;
  static Recommendation from_json(const Json& row);
};

class RecommendBackend {
 public:
  virtual ~RecommendBackend() = default;
  virtual Recommendation recommend(const RecommendContext& context) const = 0;
};

// Picks the candidate whose feature is closest (cosine) to the mean context
// feature, ties by id. Candidates are items of the requested categories, or
// of categories not yet in the context when none were requested. Context and
// excluded items never qualify.
class StubRecommender final : public RecommendBackend {
 public:
  StubRecommender(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features);
  Recommendation recommend(const RecommendContext& context) const override;

 private:
  const Catalog& catalog_;
  std::shared_ptr<const ItemFeatures> features_;
};

// POST {endpoint}/recommend with the context JSON; expects Recommendation JSON.
class HttpRecommender final : public RecommendBackend {
 public:
  explicit HttpRecommender(std::string endpoint);
  Recommendation recommend(const RecommendContext& context) const override;

 private:
  std::string endpoint_;
};

class ImageGenBackend {
 public:
  virtual ~ImageGenBackend() = default;
  // Returns an image ref for the described item.
  virtual std::string generate(const std::string& description, const std::optional<ItemId>& item) const = 0;
};

// Returns catalog imagery: the named item's image, else the nearest item to
// the description text.
class StubImageGenerator final : public ImageGenBackend {
 public:
  StubImageGenerator(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features);
  std::string generate(const std::string& description, const std::optional<ItemId>& item) const override;

 private:
  const Catalog& catalog_;
  std::shared_ptr<const ItemFeatures> features_;
};

// POST {endpoint}/generate {"description","item_id"?} -> {"image_ref"}.
class HttpImageGenerator final : public ImageGenBackend {
 public:
  explicit HttpImageGenerator(std::string endpoint);
  std::string generate(const std::string& description, const std::optional<ItemId>& item) const override;

 private:
  std::string endpoint_;
};

class TryOnBackend {
 public:
  virtual ~TryOnBackend() = default;
  virtual std::string try_on(const std::optional<std::string>& person_ref,
                             const std::vector<std::string>& item_refs) const = 0;
};

inline constexpr int kCanvasSize = 512;

// Placeholder composite: item images tiled on a fixed 512x512 canvas, written
// as binary PPM under generated/. Binary PPM inputs are scaled into their
// tile; other formats become a flat tile colored from their bytes.
class StubTryOn final : public TryOnBackend {
 public:
  explicit StubTryOn(const ImageStore& images);
  std::string try_on(const std::optional<std::string>& person_ref,
                     const std::vector<std::string>& item_refs) const override;

 private:
  const ImageStore& images_;
};

struct ToolBackends {
  std::shared_ptr<const RecommendBackend> recommender;
  std::shared_ptr<const ImageGenBackend> image_generator;
  std::shared_ptr<const TryOnBackend> try_on;
};

// Registers recommend, generate_image, retrieve_similar and try_on.
ToolRegistry make_tool_registry(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features,
                                ToolBackends backends);

}  // namespace fashionrec
