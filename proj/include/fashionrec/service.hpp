#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "fashionrec/orchestrator.hpp"

namespace fashionrec {

struct ServiceConfig {
  std::filesystem::path catalog_dir;
  std::filesystem::path work_dir;  // uploads/, generated/, sessions/
  EmbedderConfig embedder;
  std::optional<std::string> recommend_endpoint;  // stub recommender when unset
  std::optional<std::string> image_endpoint;      // stub image generator when unset
  bool allow_anonymous = true;
  bool persist_sessions = true;
};

// Owns everything the orchestrator borrows. Not movable once built.
class Service {
 public:
  explicit Service(const ServiceConfig& config);
  Service(Catalog catalog, const ServiceConfig& config);

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const Catalog& catalog() const { return catalog_; }
  const ItemFeatures& features() const { return *features_; }
  const ImageStore& images() const { return *images_; }
  Orchestrator& orchestrator() { return *orchestrator_; }

 private:
  void init(const ServiceConfig& config);

  Catalog catalog_;
  std::shared_ptr<ItemFeatures> features_;
  std::unique_ptr<ImageStore> images_;
  std::unique_ptr<SessionStore> sessions_;
  std::unique_ptr<Orchestrator> orchestrator_;
};

}  // namespace fashionrec
