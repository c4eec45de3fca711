#include "fashionrec/service.hpp"

namespace fashionrec {

Service::Service(const ServiceConfig& config) : catalog_(Catalog::load_dir(config.catalog_dir)) { init(config); }

Service::Service(Catalog catalog, const ServiceConfig& config) : catalog_(std::move(catalog)) { init(config); }

void Service::init(const ServiceConfig& config) {
  EmbedderConfig embed = config.embedder;
  if (embed.image_root.empty()) embed.image_root = catalog_.base_dir();
  features_ = std::make_shared<ItemFeatures>(make_embedder(embed));
  const auto catalog_dir = config.catalog_dir.empty() ? catalog_.base_dir() : config.catalog_dir;
  images_ = std::make_unique<ImageStore>(config.work_dir, catalog_dir);

  ToolBackends backends;
  if (config.recommend_endpoint) {
    backends.recommender = std::make_shared<HttpRecommender>(*config.recommend_endpoint);
  } else {
    backends.recommender = std::make_shared<StubRecommender>(catalog_, features_);
  }
  if (config.image_endpoint) {
    backends.image_generator = std::make_shared<HttpImageGenerator>(*config.image_endpoint);
  } else {
    backends.image_generator = std::make_shared<StubImageGenerator>(catalog_, features_);
  }
  backends.try_on = std::make_shared<StubTryOn>(*images_);

  std::optional<std::filesystem::path> session_dir;
  if (config.persist_sessions) session_dir = config.work_dir / "sessions";
  sessions_ = std::make_unique<SessionStore>(session_dir);

  OrchestratorConfig oc;
  oc.allow_anonymous = config.allow_anonymous;
  orchestrator_ = std::make_unique<Orchestrator>(catalog_, features_, *images_,
                                                 make_tool_registry(catalog_, features_, backends), *sessions_, oc);
}

}  // namespace fashionrec
