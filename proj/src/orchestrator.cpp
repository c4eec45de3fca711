#include "fashionrec/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>

#include "fashionrec/error.hpp"
#include "fashionrec/hashing.hpp"
#include "fashionrec/sample_builder.hpp"
#include "fashionrec/text.hpp"

namespace fashionrec {

Json ToolCall::to_json() const {
  Json row{{"tool", tool},
           {"args_digest", args_digest},
           {"outcome_digest", outcome_digest},
           {"ok", ok},
           {"summary", summary},
           {"image_refs", image_refs}};
  if (!ok) row["error"] = error;
  return row;
}

ToolCall ToolCall::from_json(const Json& row) {
  ToolCall c;
  c.tool = row.at("tool").get<std::string>();
  c.args_digest = row.value("args_digest", std::string());
  c.outcome_digest = row.value("outcome_digest", std::string());
  c.ok = row.value("ok", true);
  c.error = row.value("error", std::string());
  c.summary = row.value("summary", std::string());
  c.image_refs = row.value("image_refs", std::vector<std::string>{});
  return c;
}

Json AssistantReply::to_json() const {
  Json trace = Json::array();
  for (const auto& c : tool_trace) trace.push_back(c.to_json());
  return Json{{"text", text},
              {"image_refs", image_refs},
              {"tool_trace", trace},
              {"recommended_item", recommended_item ? Json(*recommended_item) : Json(nullptr)}};
}

AssistantReply AssistantReply::from_json(const Json& row) {
  AssistantReply r;
  r.text = row.at("text").get<std::string>();
  r.image_refs = row.value("image_refs", std::vector<std::string>{});
  for (const auto& c : row.value("tool_trace", Json::array())) r.tool_trace.push_back(ToolCall::from_json(c));
  if (row.contains("recommended_item") && row["recommended_item"].is_string()) {
    r.recommended_item = row["recommended_item"].get<std::string>();
  }
  return r;
}

Json Session::to_json() const {
  Json turns_json = Json::array();
  for (const auto& t : turns) {
    turns_json.push_back(Json{{"user", Json{{"text", t.message.text}, {"image_refs", t.message.image_refs}}},
                              {"assistant", t.reply.to_json()}});
  }
  return Json{{"id", id},
              {"user_id", user_id ? Json(*user_id) : Json(nullptr)},
              {"created_at", created_at},
              {"turns", turns_json}};
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string session_id(std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%06zu", n);
  return buf;
}

Json turn_json(const SessionTurn& turn) {
  return Json{{"type", "turn"},
              {"user", Json{{"text", turn.message.text}, {"image_refs", turn.message.image_refs}}},
              {"assistant", turn.reply.to_json()}};
}

}  // namespace

SessionStore::SessionStore(std::optional<std::filesystem::path> dir, Clock clock)
    : dir_(std::move(dir)), clock_(clock ? std::move(clock) : Clock(utc_now)) {
  if (!dir_) return;
  std::filesystem::create_directories(*dir_);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    auto slot = std::make_unique<Slot>();
    for_each_jsonl(path, [&](const Json& row, std::size_t) {
      if (row.value("type", "") == "session") {
        slot->session.id = row.at("id").get<std::string>();
        if (row.contains("user_id") && row["user_id"].is_string()) slot->session.user_id = row["user_id"].get<std::string>();
        slot->session.created_at = row.value("created_at", std::string());
      } else {
        SessionTurn turn;
        turn.message.text = row.at("user").at("text").get<std::string>();
        turn.message.image_refs = row.at("user").value("image_refs", std::vector<std::string>{});
        turn.reply = AssistantReply::from_json(row.at("assistant"));
        slot->session.turns.push_back(std::move(turn));
      }
    });
    if (slot->session.id.empty()) continue;
    if (slot->session.id.size() > 1 && slot->session.id[0] == 's') {
      try {
        next_id_ = std::max<std::size_t>(next_id_, std::stoul(slot->session.id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
    const std::string id = slot->session.id;
    sessions_.emplace(id, std::move(slot));
  }
}

void SessionStore::persist_header(const Session& s) const {
  if (!dir_) return;
  Json row{{"type", "session"}, {"id", s.id}, {"created_at", s.created_at}};
  row["user_id"] = s.user_id ? Json(*s.user_id) : Json(nullptr);
  std::ofstream out(*dir_ / (s.id + ".jsonl"), std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInput, "cannot persist session " + s.id);
  out << row.dump() << '\n';
}

void SessionStore::persist_turn(const std::string& id, const SessionTurn& turn) const {
  if (!dir_) return;
  std::ofstream out(*dir_ / (id + ".jsonl"), std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kInput, "cannot persist session " + id);
  out << turn_json(turn).dump() << '\n';
}

Session SessionStore::create(std::optional<UserId> user) {
  std::lock_guard lock(mutex_);
  auto slot = std::make_unique<Slot>();
  std::string id = session_id(next_id_++);
  while (sessions_.contains(id)) id = session_id(next_id_++);
  slot->session.id = id;
  slot->session.user_id = std::move(user);
  slot->session.created_at = clock_();
  persist_header(slot->session);
  Session copy = slot->session;
  sessions_.emplace(id, std::move(slot));
  return copy;
}

SessionStore::Slot& SessionStore::slot(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "unknown session \"" + id + "\"");
  return *it->second;
}

Session SessionStore::get(const std::string& id) const {
  Slot& s = slot(id);
  std::lock_guard lock(s.mutex);
  return s.session;
}

bool SessionStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return sessions_.contains(id);
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

SessionTurn SessionStore::append(const std::string& id, const std::function<SessionTurn(const Session&)>& fn) {
  Slot& s = slot(id);
  std::lock_guard lock(s.mutex);
  SessionTurn turn = fn(s.session);
  persist_turn(id, turn);
  s.session.turns.push_back(turn);
  return turn;
}

namespace {

bool names_category(const std::vector<std::string>& words, const std::string& category) {
  const auto cat_words = tokenize_words(category);
  if (cat_words.empty()) return false;
  auto same = [](const std::string& w, const std::string& c) {
    return w == c || w == c + "s" || w == c + "es" || w + "s" == c || w + "es" == c;
  };
  for (std::size_t i = 0; i + cat_words.size() <= words.size(); ++i) {
    bool all = true;
    for (std::size_t j = 0; j < cat_words.size() && all; ++j) all = same(words[i + j], cat_words[j]);
    if (all) return true;
  }
  return false;
}

}  // namespace

Intents route_intents(const std::string& text, const std::vector<std::string>& categories) {
  static const std::set<std::string> kGenerate{"generate", "show", "draw", "render", "visualize", "picture", "see"};
  static const std::set<std::string> kSimilar{"similar", "alike", "comparable", "resembling", "lookalike"};
  static const std::set<std::string> kReplace{"change", "replace", "swap", "instead", "alternative", "different"};
  const auto words = tokenize_words(text);
  Intents intents;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    if (kGenerate.contains(w)) intents.generate = true;
    if (kSimilar.contains(w)) intents.similar = true;
    if (kReplace.contains(w)) intents.replace = true;
    if (w == "tryon") intents.try_on = true;
    if (w == "try") {
      // "try on" or "try it on"
      for (std::size_t j = i + 1; j < words.size() && j <= i + 2; ++j) {
        if (words[j] == "on") intents.try_on = true;
      }
    }
  }
  for (const auto& c : categories) {
    if (names_category(words, c)) intents.categories.push_back(c);
  }
  return intents;
}

Orchestrator::Orchestrator(const Catalog& catalog, std::shared_ptr<const ItemFeatures> features,
                           const ImageStore& images, ToolRegistry tools, SessionStore& sessions,
                           OrchestratorConfig config)
    : catalog_(catalog),
      features_(std::move(features)),
      images_(images),
      tools_(std::move(tools)),
      sessions_(sessions),
      config_(config) {
  for (const auto& item : catalog_.items()) {
    if (!item.image_ref.empty()) image_ref_index_.try_emplace(item.image_ref, item.id);
  }
}

Session Orchestrator::create_session(const std::optional<UserId>& user) {
  if (user && !catalog_.has_user(*user)) {
    if (!config_.allow_anonymous) throw Error(ErrorCode::kNotFound, "unknown user \"" + *user + "\"");
    return sessions_.create(std::nullopt);
  }
  if (!user && !config_.allow_anonymous) throw Error(ErrorCode::kInput, "anonymous sessions are disabled");
  return sessions_.create(user);
}

std::string Orchestrator::user_preference(const std::optional<UserId>& user) const {
  if (!user || !catalog_.has_user(*user)) return {};
  const auto items = catalog_.user_items(*user);
  return preference_summary(catalog_, std::vector<ItemId>(items.begin(), items.end()));
}

std::string Orchestrator::assemble_context(const Session& session, const std::string& refined_query,
                                           std::size_t budget) {
  std::vector<std::string> tokens;
  for (const auto& turn : session.turns) {
    auto t = whitespace_tokens(turn.message.text);
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  auto current = whitespace_tokens(refined_query);
  tokens.insert(tokens.end(), current.begin(), current.end());
  if (tokens.size() > budget) tokens.erase(tokens.begin(), tokens.end() - static_cast<std::ptrdiff_t>(budget));
  return join(tokens, " ");
}

std::optional<ItemId> Orchestrator::match_catalog_image(const std::string& ref) const {
  if (auto it = image_ref_index_.find(ref); it != image_ref_index_.end()) return it->second;
  auto path = images_.resolve(ref);
  if (!path) return std::nullopt;
  std::lock_guard lock(hash_mutex_);
  if (!image_hash_index_) {
    image_hash_index_.emplace();
    for (const auto& item : catalog_.items()) {
      if (auto p = images_.resolve(item.image_ref)) image_hash_index_->try_emplace(fnv1a64(read_file(*p)), item.id);
    }
  }
  if (auto it = image_hash_index_->find(fnv1a64(read_file(*path))); it != image_hash_index_->end()) return it->second;
  return std::nullopt;
}

namespace {

struct OutfitState {
  std::vector<ItemId> items;
  std::vector<std::string> loose_images;  // uploads with no catalog match
  std::optional<ItemId> last_recommended;

  void add(const ItemId& id) {
    if (std::find(items.begin(), items.end(), id) == items.end()) items.push_back(id);
  }
  void accept(const Catalog& catalog, const ItemId& id, bool replace) {
    if (replace) {
      const std::string& category = catalog.item(id).category;
      std::erase_if(items, [&](const ItemId& x) { return catalog.item(x).category == category; });
    }
    add(id);
    last_recommended = id;
  }
};

}  // namespace

AssistantReply Orchestrator::run_pipeline(const Session& session, const UserMessage& message) const {
  const auto categories = catalog_.categories();

  OutfitState state;
  auto absorb_uploads = [&](const std::vector<std::string>& refs) {
    for (const auto& ref : refs) {
      if (auto id = match_catalog_image(ref)) {
        state.add(*id);
      } else if (std::find(state.loose_images.begin(), state.loose_images.end(), ref) == state.loose_images.end()) {
        state.loose_images.push_back(ref);
      }
    }
  };
  for (const auto& turn : session.turns) {
    absorb_uploads(turn.message.image_refs);
    if (turn.reply.recommended_item && catalog_.has_item(*turn.reply.recommended_item)) {
      state.accept(catalog_, *turn.reply.recommended_item, route_intents(turn.message.text, categories).replace);
    }
  }
  std::vector<ItemId> previously_recommended;
  for (const auto& turn : session.turns) {
    if (turn.reply.recommended_item) previously_recommended.push_back(*turn.reply.recommended_item);
  }
  absorb_uploads(message.image_refs);

  const Intents intents = route_intents(message.text, categories);
  const std::string summary = user_preference(session.user_id);
  const std::string refined = summary.empty() ? message.text : message.text + " (" + summary + ")";
  const std::string query = assemble_context(session, refined, config_.context_token_budget);

  AssistantReply reply;
  std::vector<std::string> paragraphs;

  auto call = [&](const std::string& tool, const Json& args) -> std::optional<Json> {
    ToolCall trace;
    trace.tool = tool;
    trace.args_digest = hex64(fnv1a64(args.dump()));
    try {
      Json outcome = tools_.call_tool(tool, args);
      trace.outcome_digest = hex64(fnv1a64(outcome.dump()));
      reply.tool_trace.push_back(std::move(trace));
      return outcome;
    } catch (const std::exception& e) {
      trace.ok = false;
      trace.error = e.what();
      trace.summary = "failed";
      reply.tool_trace.push_back(std::move(trace));
      paragraphs.push_back("(The " + tool + " tool is unavailable right now, so this part of the answer is skipped.)");
      return std::nullopt;
    }
  };

  // Pure visual follow-ups act on the previous recommendation instead of asking for a new one.
  const bool follow_up = !intents.replace && intents.categories.empty() &&
                         (intents.similar || intents.try_on || intents.generate) && state.last_recommended;

  std::optional<ItemId> focus = state.last_recommended;
  if (!follow_up) {
    RecommendContext ctx;
    ctx.query = query;
    ctx.context_items = state.items;
    ctx.context_images = state.loose_images;
    ctx.preference_summary = summary;
    ctx.categories = intents.categories;
    ctx.replace = intents.replace;
    ctx.exclude = previously_recommended;
    if (auto outcome = call("recommend", ctx.to_json())) {
      const auto rec = Recommendation::from_json(*outcome);
      reply.tool_trace.back().summary = "recommended " + rec.item_id;
      paragraphs.insert(paragraphs.begin(), rec.text);
      if (catalog_.has_item(rec.item_id)) {
        reply.recommended_item = rec.item_id;
        state.accept(catalog_, rec.item_id, intents.replace);
        focus = rec.item_id;
      }
    } else {
      paragraphs.insert(paragraphs.begin(), "I couldn't reach the recommendation service just now.");
    }
  }

  auto add_images = [&](const std::vector<std::string>& refs) {
    for (const auto& ref : refs) {
      reply.image_refs.push_back(ref);
      reply.tool_trace.back().image_refs.push_back(ref);
    }
  };

  if (intents.generate && focus) {
    const Item& item = catalog_.item(*focus);
    if (auto outcome = call("generate_image", Json{{"description", item.description}, {"item_id", item.id}})) {
      const std::string ref = outcome->at("image_ref").get<std::string>();
      reply.tool_trace.back().summary = "image for " + item.id;
      add_images({ref});
      paragraphs.push_back("Here is an image of the " + item.description + ".");
    }
  }

  if (intents.similar) {
    Json args{{"k", config_.similar_k}};
    if (focus) {
      args["item_id"] = *focus;
      args["category"] = catalog_.item(*focus).category;
    } else if (!message.image_refs.empty()) {
      args["image_ref"] = message.image_refs.front();
    } else {
      args["query_text"] = message.text;
    }
    if (auto outcome = call("retrieve_similar", args)) {
      std::vector<std::string> refs, names;
      for (const auto& hit : outcome->at("results")) {
        refs.push_back(hit.at("image_ref").get<std::string>());
        names.push_back(hit.at("description").get<std::string>() + " (" + hit.at("id").get<std::string>() + ")");
      }
      reply.tool_trace.back().summary = std::to_string(refs.size()) + " similar items";
      add_images(refs);
      paragraphs.push_back(names.empty() ? "I found no similar items in the catalog."
                                         : "Similar items from the catalog: " + join(names, "; ") + ".");
    }
  }

  if (intents.try_on) {
    std::vector<std::string> refs;
    for (const auto& id : state.items) {
      const Item& item = catalog_.item(id);
      if (!item.image_ref.empty()) refs.push_back(item.image_ref);
    }
    refs.insert(refs.end(), state.loose_images.begin(), state.loose_images.end());
    if (auto outcome = call("try_on", Json{{"item_refs", refs}})) {
      const std::string ref = outcome->at("image_ref").get<std::string>();
      reply.tool_trace.back().summary = "composite of " + std::to_string(refs.size()) + " items";
      add_images({ref});
      paragraphs.push_back("Here is a virtual try-on preview of the outfit.");
    }
  }

  if (paragraphs.empty()) paragraphs.push_back("Could you tell me a bit more about what you are looking for?");
  reply.text = join(paragraphs, "\n");
  return reply;
}

AssistantReply Orchestrator::handle_message(const std::string& session_id, const std::string& text,
                                            const std::vector<std::string>& image_refs) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos && image_refs.empty()) {
    throw Error(ErrorCode::kInput, "message needs text or images");
  }
  const SessionTurn turn = sessions_.append(session_id, [&](const Session& session) {
    SessionTurn t;
    t.message = UserMessage{text, image_refs};
    t.reply = run_pipeline(session, t.message);
    return t;
  });
  return turn.reply;
}

}  // namespace fashionrec
