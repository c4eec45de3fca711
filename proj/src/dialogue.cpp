#include "fashionrec/dialogue.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <set>
#include <thread>

#include "fashionrec/error.hpp"
#include "fashionrec/hashing.hpp"
#include "fashionrec/text.hpp"
#include "http_util.hpp"
#include "prompt_assets.hpp"

namespace fashionrec {

Json Dialogue::to_json() const {
  Json turns_json = Json::array();
  for (const auto& t : turns) turns_json.push_back(Json{{"q", t.query}, {"a", t.answer}});
  Json row{{"sample_id", sample_id}, {"task", fashionrec::to_string(task)}, {"turns", turns_json}};
  if (valid) row["valid"] = *valid;
  return row;
}

Dialogue Dialogue::from_json(const Json& row) {
  Dialogue d;
  d.sample_id = row.at("sample_id").get<std::string>();
  d.task = task_from_string(row.at("task").get<std::string>());
  for (const auto& t : row.at("turns")) {
    d.turns.push_back(Turn{t.at("q").get<std::string>(), t.at("a").get<std::string>()});
  }
  if (row.contains("valid") && !row["valid"].is_null()) d.valid = row["valid"].get<int>();
  return d;
}

namespace {

ItemView view(const Catalog& catalog, const ItemId& id) {
  const Item& item = catalog.item(id);
  return ItemView{item.id, item.category, item.description, item.attributes};
}

std::vector<ItemView> views(const Catalog& catalog, const std::vector<ItemId>& ids) {
  std::vector<ItemView> out;
  for (const auto& id : ids) out.push_back(view(catalog, id));
  return out;
}

}  // namespace

DialogueContext make_context(const Catalog& catalog, const BasicSample& sample) {
  DialogueContext ctx;
  ctx.task = TaskKind::kBasic;
  ctx.sample_id = sample.id;
  ctx.partial = views(catalog, sample.partial);
  ctx.targets = views(catalog, sample.targets);
  return ctx;
}

DialogueContext make_context(const Catalog& catalog, const PersonalizedSample& sample) {
  DialogueContext ctx;
  ctx.task = TaskKind::kPersonalized;
  ctx.sample_id = sample.id;
  ctx.partial = views(catalog, sample.partial);
  ctx.targets = {view(catalog, sample.target)};
  ctx.history = views(catalog, sample.filtered_history);
  ctx.preference_summary = sample.preference_summary;
  return ctx;
}

DialogueContext make_context(const Catalog& catalog, const AlternativeSample& sample) {
  DialogueContext ctx;
  ctx.task = TaskKind::kAlternative;
  ctx.sample_id = sample.id;
  ctx.partial = views(catalog, sample.anchors);
  ctx.targets = {view(catalog, sample.replacement)};
  ctx.replaced = view(catalog, sample.replace);
  ctx.outfit = views(catalog, catalog.outfit(sample.outfit_a).item_ids);
  return ctx;
}

const std::string& system_prompt(TaskKind task) {
  static const std::string basic = detail::kBasicPrompt;
  static const std::string personalized = detail::kPersonalizedPrompt;
  static const std::string alternative = detail::kAlternativePrompt;
  switch (task) {
    case TaskKind::kBasic: return basic;
    case TaskKind::kPersonalized: return personalized;
    case TaskKind::kAlternative: return alternative;
  }
  return basic;
}

Json PromptPayload::to_json() const {
  return Json{{"task", fashionrec::to_string(task)}, {"system", system}, {"user", user}};
}

namespace {

void require_slot(bool present, const DialogueContext& ctx, const char* slot) {
  if (!present) {
    throw Error(ErrorCode::kInput,
                std::string("sample ") + ctx.sample_id + " is missing prompt slot \"" + slot + "\"");
  }
}

void list_items(std::string& out, const char* heading, const std::vector<ItemView>& items) {
  out += heading;
  out += ":\n";
  for (const auto& item : items) out += "- [" + item.category + "] " + item.description + "\n";
}

}  // namespace

PromptPayload render_prompt(const DialogueContext& ctx) {
  PromptPayload payload;
  payload.task = ctx.task;
  payload.system = system_prompt(ctx.task);
  payload.context = ctx;
  std::string& user = payload.user;
  switch (ctx.task) {
    case TaskKind::kBasic:
      require_slot(!ctx.partial.empty(), ctx, "partial outfit");
      require_slot(!ctx.targets.empty(), ctx, "target items");
      list_items(user, "Partial Outfit", ctx.partial);
      list_items(user, "Target Items", ctx.targets);
      user += "Number of Target Items: " + std::to_string(ctx.targets.size()) + "\n";
      break;
    case TaskKind::kPersonalized:
      require_slot(!ctx.partial.empty(), ctx, "partial outfit");
      require_slot(ctx.targets.size() == 1, ctx, "target item");
      require_slot(!ctx.history.empty(), ctx, "historical items");
      require_slot(!ctx.preference_summary.empty(), ctx, "preference summary");
      list_items(user, "Partial Outfit", ctx.partial);
      list_items(user, "Target Items", ctx.targets);
      list_items(user, "User's Historical Interacted Items", ctx.history);
      user += "Preference Summary: " + ctx.preference_summary + "\n";
      break;
    case TaskKind::kAlternative:
      require_slot(!ctx.outfit.empty(), ctx, "outfit A");
      require_slot(ctx.replaced.has_value(), ctx, "item A");
      require_slot(ctx.targets.size() == 1, ctx, "item B");
      list_items(user, "Outfit A", ctx.outfit);
      user += "Item A (to replace): [" + ctx.replaced->category + "] " + ctx.replaced->description + "\n";
      user += "Item B (changeable item): [" + ctx.targets[0].category + "] " +
              ctx.targets[0].description + "\n";
      break;
  }
  return payload;
}

namespace {

std::string describe_list(const std::vector<ItemView>& items) {
  std::vector<std::string> parts;
  for (const auto& item : items) parts.push_back(item.description);
  if (parts.size() <= 1) return parts.empty() ? std::string() : parts[0];
  const std::string last = parts.back();
  parts.pop_back();
  return join(parts, ", ") + " and " + last;
}

std::size_t variant(const std::string& key, std::size_t n) {
  return static_cast<std::size_t>(fnv1a64(key) % n);
}

std::vector<std::string> shared_attributes(const ItemView& target, const std::vector<ItemView>& history) {
  std::set<std::string> tags(target.attributes.begin(), target.attributes.end());
  std::set<std::string> shared;
  for (const auto& h : history) {
    for (const auto& a : h.attributes) {
      if (tags.contains(a)) shared.insert(a);
    }
  }
  return {shared.begin(), shared.end()};
}

Dialogue fallback_basic(const DialogueContext& ctx) {
  static const char* const kOpeners[] = {
      "I've uploaded a photo of my outfit. Which %s would complete it?",
      "Here's a picture of what I'm wearing. Can you suggest %s to go with it?",
      "Take a look at the outfit in my image. What %s would pair well with it?"};
  static const char* const kFollowUps[] = {"Great. Could you also recommend %s for this look?",
                                           "Thanks! What about %s to match?",
                                           "Nice. Any %s that would suit the same outfit?"};
  Dialogue d;
  d.sample_id = ctx.sample_id;
  d.task = ctx.task;
  const std::string partial = describe_list(ctx.partial);
  for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
    const auto& target = ctx.targets[i];
    const char* pattern = i == 0 ? kOpeners[variant(ctx.sample_id, 3)]
                                 : kFollowUps[variant(ctx.sample_id + "#" + std::to_string(i), 3)];
    char query[512];
    std::snprintf(query, sizeof(query), pattern, target.category.c_str());
    std::string answer = "I'd suggest the " + target.description + ". It works with the " + partial +
                         " and keeps the look coherent.";
    d.turns.push_back(Turn{query, std::move(answer)});
  }
  return d;
}

Dialogue fallback_personalized(const DialogueContext& ctx) {
  Dialogue d;
  d.sample_id = ctx.sample_id;
  d.task = ctx.task;
  const auto& target = ctx.targets.at(0);
  const auto shared = shared_attributes(target, ctx.history);
  d.valid = shared.empty() ? 0 : 1;
  std::string query = "Here is a photo of my outfit. What " + target.category +
                      " should I add to it? (" + ctx.preference_summary + ")";
  std::string answer = "The " + target.description + " would round out the " + describe_list(ctx.partial) + ".";
  if (shared.empty()) {
    answer += " It is a bit different from what you usually pick, so you may want to compare it with a "
              "piece closer to your usual style.";
  } else {
    answer += " It also echoes the " + join(shared, ", ") + " details you tend to choose.";
  }
  d.turns.push_back(Turn{std::move(query), std::move(answer)});
  return d;
}

Dialogue fallback_alternative(const DialogueContext& ctx) {
  Dialogue d;
  d.sample_id = ctx.sample_id;
  d.task = ctx.task;
  const ItemView& from = *ctx.replaced;
  const ItemView& to = ctx.targets.at(0);
  std::vector<ItemView> remaining;
  for (const auto& item : ctx.outfit) {
    if (item.id != from.id) remaining.push_back(item);
  }
  std::string query = "This is the outfit I'm wearing now. I'd like to swap the " + from.category +
                      " for something different. Any ideas?";
  std::string answer = "Try the " + to.description + " instead of the " + from.description +
                       ". It pairs well with the " + describe_list(remaining) + ".";
  d.turns.push_back(Turn{std::move(query), std::move(answer)});
  return d;
}

}  // namespace

Dialogue template_fallback(const DialogueContext& ctx) {
  switch (ctx.task) {
    case TaskKind::kBasic: return fallback_basic(ctx);
    case TaskKind::kPersonalized: return fallback_personalized(ctx);
    case TaskKind::kAlternative: return fallback_alternative(ctx);
  }
  return fallback_basic(ctx);
}

Dialogue TemplateBackend::generate(const PromptPayload& payload) const {
  return template_fallback(payload.context);
}

RemoteChatBackend::RemoteChatBackend(ChatBackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw Error(ErrorCode::kConfig, "remote dialogue backend requires an endpoint");
}

namespace {

std::string strip_code_fence(std::string text) {
  const auto first = text.find("```");
  if (first == std::string::npos) return text;
  const auto body = text.find('\n', first);
  const auto last = text.rfind("```");
  if (body == std::string::npos || last <= body) return text;
  return text.substr(body + 1, last - body - 1);
}

}  // namespace

Dialogue parse_dialogue_output(const std::string& raw, const PromptPayload& payload) {
  Json doc = Json::parse(strip_code_fence(raw), nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && doc.contains("choices")) {
    try {
      doc = Json::parse(strip_code_fence(doc.at("choices").at(0).at("message").at("content").get<std::string>()),
                        nullptr, false);
    } catch (const Json::exception&) {
      throw ParseError("chat completion envelope has no message content", raw);
    }
  }
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("rounds") || !doc["rounds"].is_array()) {
    throw ParseError("dialogue output is not a {\"rounds\": [...]} document", raw);
  }
  Dialogue d;
  d.sample_id = payload.context.sample_id;
  d.task = payload.task;
  try {
    for (const auto& round : doc["rounds"]) {
      d.turns.push_back(Turn{round.at("user").get<std::string>(), round.at("assistant").get<std::string>()});
    }
    if (doc.contains("valid") && !doc["valid"].is_null()) d.valid = doc["valid"].get<int>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("dialogue output has a malformed round: ") + e.what(), raw);
  }
  return d;
}

Dialogue RemoteChatBackend::generate(const PromptPayload& payload) const {
  Json body{{"model", config_.model},
            {"temperature", config_.temperature},
            {"response_format", Json{{"type", "json_object"}}},
            {"messages", Json::array({Json{{"role", "system"}, {"content", payload.system}},
                                      Json{{"role", "user"}, {"content", payload.user}}})}};
  const std::string raw = detail::post_json(config_.endpoint, "/chat/completions", body, config_.timeout_sec);
  return parse_dialogue_output(raw, payload);
}

Dialogue generate_dialogue(const PromptPayload& payload, const DialogueBackend& backend) {
  return backend.generate(payload);
}

Json Violation::to_json() const {
  Json row{{"rule", rule}, {"message", message}};
  row["turn"] = turn ? Json(*turn) : Json(nullptr);
  return row;
}

bool leaks_description(const std::string& query, const std::string& description) {
  const auto needle = content_words(description);
  if (needle.empty()) return false;
  const auto haystack = content_words(query);
  const std::size_t window = std::min<std::size_t>(3, needle.size());
  for (std::size_t i = 0; i + window <= needle.size(); ++i) {
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin() + static_cast<std::ptrdiff_t>(i),
                          needle.begin() + static_cast<std::ptrdiff_t>(i + window));
    if (it != haystack.end()) return true;
  }
  return false;
}

namespace {

// Position of the opening '(' of a trailing "(...)" group, or npos.
std::size_t suffix_start(const std::string& query) {
  std::size_t end = query.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(query[end - 1]))) --end;
  if (end == 0 || query[end - 1] != ')') return std::string::npos;
  const auto open = query.rfind('(', end - 1);
  if (open == std::string::npos) return std::string::npos;
  const std::string inner = query.substr(open + 1, end - open - 2);
  if (inner.find_first_of("()") != std::string::npos) return std::string::npos;
  if (inner.find_first_not_of(" \t") == std::string::npos) return std::string::npos;
  return open;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

bool has_preference_suffix(const std::string& query) { return suffix_start(query) != std::string::npos; }

std::string strip_preference_suffix(const std::string& query) {
  const auto open = suffix_start(query);
  if (open == std::string::npos) return query;
  const auto end = query.find_last_not_of(" \t", open == 0 ? 0 : open - 1);
  return end == std::string::npos || open == 0 ? std::string() : query.substr(0, end + 1);
}

std::vector<Violation> validate_dialogue(const Dialogue& dialogue, const DialogueContext& ctx) {
  std::vector<Violation> out;
  const std::size_t rounds = dialogue.turns.size();

  // R1
  if (ctx.task == TaskKind::kBasic) {
    if (rounds < 1 || rounds > ctx.targets.size()) {
      out.push_back({"R1",
                     "basic dialogue has " + std::to_string(rounds) + " rounds for " +
                         std::to_string(ctx.targets.size()) + " target items",
                     std::nullopt});
    }
  } else if (rounds != 1) {
    out.push_back({"R1", std::string(to_string(ctx.task)) + " dialogue must have exactly one round, got " +
                             std::to_string(rounds),
                   std::nullopt});
  }

  for (std::size_t i = 0; i < rounds; ++i) {
    const Turn& turn = dialogue.turns[i];
    // R5
    if (blank(turn.query) || blank(turn.answer)) {
      out.push_back({"R5", "turn has an empty query or response", i});
    }
    // R2: the injected preference suffix is backend context, not user wording.
    const std::string user_text =
        ctx.task == TaskKind::kPersonalized ? strip_preference_suffix(turn.query) : turn.query;
    for (const auto& target : ctx.targets) {
      if (leaks_description(user_text, target.description)) {
        out.push_back({"R2", "user query reveals target item " + target.id, i});
        break;
      }
    }
    // R3
    if (ctx.task == TaskKind::kPersonalized && !has_preference_suffix(turn.query)) {
      out.push_back({"R3", "personalized query lacks a trailing (preference) suffix", i});
    }
  }

  // R4
  if (ctx.task == TaskKind::kPersonalized) {
    if (!dialogue.valid || (*dialogue.valid != 0 && *dialogue.valid != 1)) {
      out.push_back({"R4", "personalized dialogue needs valid in {0,1}", std::nullopt});
    }
  } else if (dialogue.valid) {
    out.push_back({"R4", "valid flag is only allowed on personalized dialogues", std::nullopt});
  }
  return out;
}

std::vector<DialogueContext> load_contexts(const Catalog& catalog, const std::filesystem::path& dir) {
  std::vector<DialogueContext> out;
  auto load = [&](TaskKind kind, auto&& parse) {
    const auto path = dir / (std::string(to_string(kind)) + ".jsonl");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return;
    for_each_jsonl(path, [&](const Json& row, std::size_t line) {
      try {
        out.push_back(make_context(catalog, parse(row)));
      } catch (const Json::exception& e) {
        throw ParseError(path.filename().string() + ":" + std::to_string(line) + ": " + e.what(), row.dump(),
                         line);
      }
    });
  };
  load(TaskKind::kBasic, basic_from_json);
  load(TaskKind::kPersonalized, personalized_from_json);
  load(TaskKind::kAlternative, alternative_from_json);
  return out;
}

Json GenerationSummary::to_json() const { return Json{{"generated", generated}, {"failed", failed}}; }

GenerationSummary generate_dialogues(const std::vector<DialogueContext>& contexts,
                                     const DialogueBackend& backend, const std::filesystem::path& out_dir,
                                     std::size_t max_in_flight) {
  struct Slot {
    std::optional<Dialogue> dialogue;
    Json error;
  };
  std::vector<Slot> slots(contexts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < contexts.size(); i = next++) {
      try {
        slots[i].dialogue = generate_dialogue(render_prompt(contexts[i]), backend);
      } catch (const ParseError& e) {
        slots[i].error = Json{{"sample_id", contexts[i].sample_id}, {"error", e.what()}, {"raw", e.raw()}};
      } catch (const std::exception& e) {
        slots[i].error = Json{{"sample_id", contexts[i].sample_id}, {"error", e.what()}};
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(contexts.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  GenerationSummary summary;
  std::vector<Json> rows, errors;
  for (auto& slot : slots) {
    if (slot.dialogue) {
      rows.push_back(slot.dialogue->to_json());
      ++summary.generated;
    } else {
      errors.push_back(std::move(slot.error));
      ++summary.failed;
    }
  }
  write_jsonl(out_dir / "dialogues.jsonl", rows);
  if (!errors.empty()) write_jsonl(out_dir / "dialogue_errors.jsonl", errors);
  return summary;
}

Json ValidationSummary::to_json() const {
  Json list = Json::array();
  std::map<std::string, std::size_t> by_rule;
  for (const auto& [sample, v] : violations) {
    Json row = v.to_json();
    row["sample_id"] = sample;
    list.push_back(row);
    ++by_rule[v.rule];
  }
  return Json{{"checked", checked}, {"missing", missing}, {"violations", violations.size()},
              {"by_rule", by_rule}, {"details", list}};
}

ValidationSummary validate_dialogues(const std::vector<DialogueContext>& contexts,
                                     const std::vector<Dialogue>& dialogues) {
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : dialogues) by_id[d.sample_id] = &d;
  ValidationSummary summary;
  for (const auto& ctx : contexts) {
    auto it = by_id.find(ctx.sample_id);
    if (it == by_id.end()) {
      ++summary.missing;
      continue;
    }
    ++summary.checked;
    for (auto& v : validate_dialogue(*it->second, ctx)) summary.violations.emplace_back(ctx.sample_id, std::move(v));
  }
  return summary;
}

}  // namespace fashionrec
