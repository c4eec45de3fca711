#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fashionrec/catalog.hpp"
#include "fashionrec/jsonl.hpp"
#include "fashionrec/sample_builder.hpp"

namespace fashionrec {

struct Turn {
  std::string query;   // X_q
  std::string answer;  // X_a

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string sample_id;
  TaskKind task = TaskKind::kBasic;
  std::vector<Turn> turns;
  std::optional<int> valid;  // personalized only

  Json to_json() const;
  static Dialogue from_json(const Json& row);
  bool operator==(const Dialogue&) const = default;
};

struct ItemView {
  ItemId id;
  std::string category;
  std::string description;
  std::vector<std::string> attributes;
};

// A sample resolved against the catalog: the slot values the prompt needs
// and the facts the validators check against.
struct DialogueContext {
  TaskKind task = TaskKind::kBasic;
  std::string sample_id;
  std::vector<ItemView> partial;  // basic/personalized: P; alternative: S
  // Items the user query must not give away: T, the personalized target, or
  // the alternative replacement i_b.
  std::vector<ItemView> targets;
  std::vector<ItemView> history;   // personalized U_c'
  std::string preference_summary;  // personalized
  std::optional<ItemView> replaced;  // alternative i_a
  std::vector<ItemView> outfit;      // alternative O_a, in outfit order
};

DialogueContext make_context(const Catalog& catalog, const BasicSample& sample);
DialogueContext make_context(const Catalog& catalog, const PersonalizedSample& sample);
DialogueContext make_context(const Catalog& catalog, const AlternativeSample& sample);

// System prompt text for the task, shipped verbatim under assets/prompts/.
const std::string& system_prompt(TaskKind task);

struct PromptPayload {
  TaskKind task = TaskKind::kBasic;
  std::string system;
  std::string user;
  DialogueContext context;

  Json to_json() const;
};

// Throws kInput when a slot the task needs is empty.
PromptPayload render_prompt(const DialogueContext& context);

class DialogueBackend {
 public:
  virtual ~DialogueBackend() = default;
  virtual std::string name() const = 0;
  virtual Dialogue generate(const PromptPayload& payload) const = 0;
};

// Deterministic slot-filled dialogue that passes every validator rule.
Dialogue template_fallback(const DialogueContext& context);

class TemplateBackend final : public DialogueBackend {
 public:
  std::string name() const override { return "fallback"; }
  Dialogue generate(const PromptPayload& payload) const override;
};

struct ChatBackendConfig {
  std::string endpoint;  // base URL; requests go to {endpoint}/chat/completions
  std::string model = "default";
  double temperature = 0.0;
  int timeout_sec = 60;
};

// One chat-completion call per sample. Accepts a bare {"rounds":[...]}
// document or an OpenAI-style envelope whose message content holds it.
class RemoteChatBackend final : public DialogueBackend {
 public:
  explicit RemoteChatBackend(ChatBackendConfig config);
  std::string name() const override { return "remote"; }
  Dialogue generate(const PromptPayload& payload) const override;

 private:
  ChatBackendConfig config_;
};

// Parses {"rounds":[{"user","assistant"}], "valid"?}. Throws ParseError with the raw text.
Dialogue parse_dialogue_output(const std::string& raw, const PromptPayload& payload);

Dialogue generate_dialogue(const PromptPayload& payload, const DialogueBackend& backend);

struct Violation {
  std::string rule;  // R1..R5
  std::string message;
  std::optional<std::size_t> turn;

  Json to_json() const;
};

// R1 round count, R2 target leakage in user queries, R3 personalized
// preference suffix, R4 valid flag presence, R5 non-empty turns.
std::vector<Violation> validate_dialogue(const Dialogue& dialogue, const DialogueContext& context);

// True when the query contains min(3, n) consecutive content words of the
// description, where n is the description's content-word count.
bool leaks_description(const std::string& query, const std::string& description);

// Strips a trailing "(...)" preference suffix, if any.
std::string strip_preference_suffix(const std::string& query);
bool has_preference_suffix(const std::string& query);

// Resolved contexts for every sample file present in a dataset directory,
// in basic, personalized, alternative order.
std::vector<DialogueContext> load_contexts(const Catalog& catalog, const std::filesystem::path& dataset_dir);

struct GenerationSummary {
  std::size_t generated = 0;
  std::size_t failed = 0;
  Json to_json() const;
};

// Writes dialogues.jsonl (sample order) and dialogue_errors.jsonl for failed
// samples with the raw backend output. At most max_in_flight concurrent calls.
GenerationSummary generate_dialogues(const std::vector<DialogueContext>& contexts,
                                     const DialogueBackend& backend, const std::filesystem::path& out_dir,
                                     std::size_t max_in_flight = 4);

struct ValidationSummary {
  std::size_t checked = 0;
  std::size_t missing = 0;  // samples without a dialogue
  std::vector<std::pair<std::string, Violation>> violations;
  Json to_json() const;
};

ValidationSummary validate_dialogues(const std::vector<DialogueContext>& contexts,
                                     const std::vector<Dialogue>& dialogues);

}  // namespace fashionrec
