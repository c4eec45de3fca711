#include <gtest/gtest.h>
#include <httplib.h>

#include <algorithm>
#include <thread>

#include "fashionrec/dialogue.hpp"
#include "fashionrec/history_filter.hpp"
#include "fashionrec/sample_builder.hpp"
#include "test_support.hpp"

namespace fashionrec {
namespace {

using testing::TempDir;
using testing::throws_code;

std::vector<std::string> rules(const std::vector<Violation>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v.rule);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct FixtureContexts {
  std::vector<DialogueContext> basic, personalized, alternative;
};

const FixtureContexts& contexts() {
  static const FixtureContexts ctx = [] {
    const Catalog& c = testing::fixture_catalog();
    auto features = testing::mock_features(32);
    HistoryFilter filter(c, *features);
    FixtureContexts out;
    for (const auto& o : c.outfits()) out.basic.push_back(make_context(c, build_basic(o, 42)));
    for (const auto& u : c.users()) {
      for (const auto& oid : u.outfit_ids) {
        if (auto s = build_personalized(filter, c, oid, u.id)) out.personalized.push_back(make_context(c, *s));
      }
    }
    for (const auto& pair : find_alternative_pairs(c)) {
      for (const auto& s : build_alternative(c, pair)) out.alternative.push_back(make_context(c, s));
    }
    return out;
  }();
  return ctx;
}

TEST(Fallback, ProducesZeroViolationsOnFixture) {
  std::size_t checked = 0;
  for (const auto* group : {&contexts().basic, &contexts().personalized, &contexts().alternative}) {
    ASSERT_FALSE(group->empty());
    for (const auto& ctx : *group) {
      const Dialogue d = template_fallback(ctx);
      const auto vs = validate_dialogue(d, ctx);
      ASSERT_TRUE(vs.empty()) << ctx.sample_id << ": " << vs.front().rule << " " << vs.front().message;
      ++checked;
    }
  }
  EXPECT_GT(checked, 500U);
}

TEST(Fallback, BasicUsesOneRoundPerTarget) {
  for (const auto& ctx : contexts().basic) EXPECT_EQ(template_fallback(ctx).turns.size(), ctx.targets.size());
}

TEST(Fallback, PersonalizedValidFollowsAttributeOverlap) {
  for (const auto& ctx : contexts().personalized) {
    const Dialogue d = template_fallback(ctx);
    ASSERT_TRUE(d.valid.has_value());
    bool shared = false;
    for (const auto& h : ctx.history) {
      for (const auto& a : h.attributes) {
        const auto& t = ctx.targets.front().attributes;
        shared = shared || std::find(t.begin(), t.end(), a) != t.end();
      }
    }
    EXPECT_EQ(*d.valid, shared ? 1 : 0);
    EXPECT_TRUE(d.turns.front().query.ends_with("(" + ctx.preference_summary + ")"));
  }
}

TEST(Mutations, ExtraRoundTriggersOnlyRoundCount) {
  for (const auto* group : {&contexts().basic, &contexts().personalized, &contexts().alternative}) {
    const auto& ctx = group->front();
    Dialogue d = template_fallback(ctx);
    while (d.turns.size() <= ctx.targets.size()) d.turns.push_back(d.turns.front());
    if (ctx.task != TaskKind::kBasic && d.turns.size() < 2) d.turns.push_back(d.turns.front());
    EXPECT_EQ(rules(validate_dialogue(d, ctx)), std::vector<std::string>{"R1"}) << ctx.sample_id;
  }
}

TEST(Mutations, LeakedTargetTriggersOnlyLeakage) {
  for (const auto* group : {&contexts().basic, &contexts().personalized, &contexts().alternative}) {
    for (std::size_t i = 0; i < std::min<std::size_t>(group->size(), 25); ++i) {
      const auto& ctx = (*group)[i];
      Dialogue d = template_fallback(ctx);
      const std::string leak = " I want the " + ctx.targets.front().description + ".";
      auto& q = d.turns.front().query;
      if (ctx.task == TaskKind::kPersonalized) {
        const auto open = q.rfind(" (");
        q.insert(open, leak);
      } else {
        q += leak;
      }
      EXPECT_EQ(rules(validate_dialogue(d, ctx)), std::vector<std::string>{"R2"}) << ctx.sample_id;
    }
  }
}

TEST(Mutations, StrippedSuffixTriggersOnlyInjectionRule) {
  for (std::size_t i = 0; i < 25 && i < contexts().personalized.size(); ++i) {
    const auto& ctx = contexts().personalized[i];
    Dialogue d = template_fallback(ctx);
    d.turns.front().query = strip_preference_suffix(d.turns.front().query);
    EXPECT_EQ(rules(validate_dialogue(d, ctx)), std::vector<std::string>{"R3"});
  }
}

TEST(Mutations, ValidFlagAndEmptyTurns) {
  const auto& pctx = contexts().personalized.front();
  Dialogue d = template_fallback(pctx);
  d.valid.reset();
  EXPECT_EQ(rules(validate_dialogue(d, pctx)), std::vector<std::string>{"R4"});
  d.valid = 2;
  EXPECT_EQ(rules(validate_dialogue(d, pctx)), std::vector<std::string>{"R4"});

  const auto& bctx = contexts().basic.front();
  Dialogue b = template_fallback(bctx);
  b.valid = 1;
  EXPECT_EQ(rules(validate_dialogue(b, bctx)), std::vector<std::string>{"R4"});
  b = template_fallback(bctx);
  b.turns.front().answer = "   ";
  EXPECT_EQ(rules(validate_dialogue(b, bctx)), std::vector<std::string>{"R5"});
  b.turns.clear();
  EXPECT_EQ(rules(validate_dialogue(b, bctx)), std::vector<std::string>{"R1"});
}

TEST(Leakage, VerbatimDescriptionAlwaysLeaks) {
  const Catalog& c = testing::fixture_catalog();
  for (const auto& item : c.items()) {
    EXPECT_TRUE(leaks_description("Could I get the " + item.description + " please?", item.description));
    EXPECT_FALSE(leaks_description("What " + item.category + " would go with this?", item.description));
  }
  EXPECT_TRUE(leaks_description("the RED tote", "red tote"));
  EXPECT_FALSE(leaks_description("black jeans and a ribbed top", "black slim-fit ribbed jeans"));
}

TEST(PreferenceSuffix, Detection) {
  EXPECT_TRUE(has_preference_suffix("Which shoes? (prefers: black)"));
  EXPECT_FALSE(has_preference_suffix("Which shoes?"));
  EXPECT_FALSE(has_preference_suffix("Which shoes? ()"));
  EXPECT_EQ(strip_preference_suffix("Which shoes? (prefers: black)"), "Which shoes?");
}

TEST(RenderPrompt, CarriesSystemTextAndSlots) {
  const auto& ctx = *std::find_if(contexts().basic.begin(), contexts().basic.end(),
                                  [](const DialogueContext& c) { return c.targets.size() == 2; });
  const auto p = render_prompt(ctx);
  EXPECT_NE(p.system.find("less than or equal to the number of target items"), std::string::npos);
  for (const auto& t : ctx.targets) EXPECT_NE(p.user.find(t.description), std::string::npos);
  EXPECT_EQ(render_prompt(ctx).user, p.user);
  EXPECT_NE(system_prompt(TaskKind::kPersonalized).find("Ensure that there is only ONE round of conversation."),
            std::string::npos);
  EXPECT_NE(system_prompt(TaskKind::kAlternative).find("exactly one round"), std::string::npos);

  DialogueContext broken = contexts().personalized.front();
  broken.preference_summary.clear();
  EXPECT_TRUE(throws_code([&] { render_prompt(broken); }, ErrorCode::kInput));
}

TEST(ParseOutput, AcceptsBareEnvelopeAndFences) {
  const auto payload = render_prompt(contexts().personalized.front());
  const std::string bare = R"J({"rounds":[{"user":"q (p)","assistant":"a"}],"valid":1})J";
  const auto d = parse_dialogue_output(bare, payload);
  EXPECT_EQ(d.turns.size(), 1U);
  EXPECT_EQ(d.valid, 1);
  EXPECT_EQ(d.sample_id, payload.context.sample_id);
  const Json envelope{{"choices", Json::array({Json{{"message", Json{{"content", "```json\n" + bare + "\n```"}}}}})}};
  EXPECT_EQ(parse_dialogue_output(envelope.dump(), payload), d);
  EXPECT_EQ(parse_dialogue_output("```\n" + bare + "\n```", payload), d);
  try {
    parse_dialogue_output("sorry, I can't", payload);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.raw(), "sorry, I can't");
  }
  EXPECT_THROW(parse_dialogue_output(R"({"rounds":[{"user":1}]})", payload), ParseError);
}

TEST(DialogueJson, RoundTrip) {
  const Dialogue d = template_fallback(contexts().personalized.front());
  EXPECT_EQ(Dialogue::from_json(d.to_json()), d);
  EXPECT_EQ(d.to_json().at("turns").at(0).contains("q"), true);
}

class FakeChat {
 public:
  explicit FakeChat(std::string reply) {
    server_.Post("/chat/completions", [reply, this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      last_ = Json::parse(req.body);
      res.set_content(Json{{"choices", Json::array({Json{{"message", Json{{"content", reply}}}}})}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeChat() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  Json last_;
  std::atomic<int> calls_{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST(RemoteBackend, SendsSystemAndUserMessages) {
  FakeChat chat(R"J({"rounds":[{"user":"Which shoes fit? (x)","assistant":"These."}],"valid":0})J");
  RemoteChatBackend backend({chat.endpoint(), "test-model", 0.0, 5});
  const auto payload = render_prompt(contexts().personalized.front());
  const Dialogue d = backend.generate(payload);
  EXPECT_EQ(d.turns.size(), 1U);
  EXPECT_EQ(chat.last_.at("model"), "test-model");
  EXPECT_EQ(chat.last_.at("messages").at(0).at("content"), payload.system);
  EXPECT_EQ(chat.last_.at("messages").at(1).at("content"), payload.user);
}

TEST(BatchGeneration, WritesInSampleOrderAndRecordsFailures) {
  TempDir dir;
  std::vector<DialogueContext> ctxs(contexts().basic.begin(), contexts().basic.begin() + 20);
  const auto summary = generate_dialogues(ctxs, TemplateBackend(), dir.path(), 4);
  EXPECT_EQ(summary.generated, 20U);
  const auto rows = read_jsonl(dir / "dialogues.jsonl");
  ASSERT_EQ(rows.size(), 20U);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].at("sample_id"), ctxs[i].sample_id);

  FakeChat junk("not json at all");
  TempDir bad;
  const auto failed = generate_dialogues({ctxs.begin(), ctxs.begin() + 3},
                                         RemoteChatBackend({junk.endpoint(), "m", 0.0, 5}), bad.path(), 2);
  EXPECT_EQ(failed.failed, 3U);
  const auto errors = read_jsonl(bad / "dialogue_errors.jsonl");
  ASSERT_EQ(errors.size(), 3U);
  EXPECT_NE(errors[0].dump().find("not json at all"), std::string::npos);
}

TEST(BatchValidation, CountsMissingAndViolationsByRule) {
  std::vector<DialogueContext> ctxs(contexts().personalized.begin(), contexts().personalized.begin() + 4);
  std::vector<Dialogue> ds;
  for (const auto& c : ctxs) ds.push_back(template_fallback(c));
  ds[1].turns.front().query = strip_preference_suffix(ds[1].turns.front().query);
  ds.pop_back();
  const auto summary = validate_dialogues(ctxs, ds);
  EXPECT_EQ(summary.checked, 3U);
  EXPECT_EQ(summary.missing, 1U);
  EXPECT_EQ(summary.to_json().at("by_rule").at("R3"), 1);
}

}  // namespace
}  // namespace fashionrec
