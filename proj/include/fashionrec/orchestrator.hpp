#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fashionrec/catalog.hpp"
#include "fashionrec/jsonl.hpp"
#include "fashionrec/tools.hpp"

namespace fashionrec {

struct UserMessage {
  std::string text;
  std::vector<std::string> image_refs;
};

struct ToolCall {
  std::string tool;
  std::string args_digest;
  std::string outcome_digest;  // empty when the call failed
  bool ok = true;
  std::string error;
  std::string summary;
  std::vector<std::string> image_refs;  // images this call contributed to the reply

  Json to_json() const;
  static ToolCall from_json(const Json& row);
};

struct AssistantReply {
  std::string text;
  std::vector<std::string> image_refs;
  std::vector<ToolCall> tool_trace;
  std::optional<ItemId> recommended_item;

  Json to_json() const;
  static AssistantReply from_json(const Json& row);
};

struct SessionTurn {
  UserMessage message;
  AssistantReply reply;
};

struct Session {
  std::string id;
  std::optional<UserId> user_id;  // empty for anonymous sessions
  std::string created_at;
  std::vector<SessionTurn> turns;

  Json to_json() const;
};

// Append-only session store. With a directory, every session is mirrored to
// <dir>/<id>.jsonl (header line, then one line per turn) and reloaded on
// construction. Each session has its own lock; turns for one session are
// strictly serialized.
class SessionStore {
 public:
  using Clock = std::function<std::string()>;

  explicit SessionStore(std::optional<std::filesystem::path> dir = std::nullopt, Clock clock = {});

  Session create(std::optional<UserId> user);
  Session get(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Runs fn with the session locked, then appends the turn it returns.
  SessionTurn append(const std::string& id, const std::function<SessionTurn(const Session&)>& fn);

 private:
  struct Slot {
    std::mutex mutex;
    Session session;
  };
  Slot& slot(const std::string& id) const;
  void persist_header(const Session& s) const;
  void persist_turn(const std::string& id, const SessionTurn& turn) const;

  std::optional<std::filesystem::path> dir_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  std::size_t next_id_ = 1;
};

struct Intents {
  bool generate = false;
  bool similar = false;
  bool try_on = false;
  bool replace = false;
  std::vector<std::string> categories;  // catalog categories named in the text
};

// Keyword router over the message text.
Intents route_intents(const std::string& text, const std::vector<std::string>& categories);

struct OrchestratorConfig {
  bool allow_anonymous = true;
  std::size_t context_token_budget = 381;
  std::size_t similar_k = 3;
};

class Orchestrator {
 public:
  Orchestrator(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features, const ImageStore& images,
               ToolRegistry tools, SessionStore& sessions, OrchestratorConfig config = {});

  // Throws kNotFound for an unknown user when anonymity is disabled.
  Session create_session(const std::optional<UserId>& user);
  AssistantReply handle_message(const std::string& session_id, const std::string& text,
                                const std::vector<std::string>& image_refs);
  Session session(const std::string& id) const { return sessions_.get(id); }

  const ToolRegistry& tools() const { return tools_; }
  const Catalog& catalog() const { return catalog_; }
  const ImageStore& images() const { return images_; }

  // Preference summary over every item in the user's outfits.
  std::string user_preference(const std::optional<UserId>& user) const;
  // Last budget whitespace tokens of the prior user texts plus the refined query.
  static std::string assemble_context(const Session& session, const std::string& refined_query,
                                      std::size_t budget);

 private:
  std::optional<ItemId> match_catalog_image(const std::string& ref) const;
  AssistantReply run_pipeline(const Session& session, const UserMessage& message) const;

  const Catalog& catalog_;
  std::shared_ptr<const ItemFeatures> features_;
  const ImageStore& images_;
  ToolRegistry tools_;
  SessionStore& sessions_;
  OrchestratorConfig config_;
  std::map<std::string, ItemId> image_ref_index_;
  mutable std::mutex hash_mutex_;
  mutable std::optional<std::map<std::uint64_t, ItemId>> image_hash_index_;
};

}  // namespace fashionrec
