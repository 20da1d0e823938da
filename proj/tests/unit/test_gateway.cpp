#include "arcweaver/gateway/gateway.hpp"
#include "arcweaver/gateway/prompts.hpp"
#include "arcweaver/gateway/schema.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace arcweaver;

namespace {

Json text_schema() {
  return {{"type", "object"},
          {"required", {"text"}},
          {"additionalProperties", false},
          {"properties", {{"text", {{"type", "string"}, {"minLength", 1}}}}}};
}

ChatRequest request(const std::string& task, Json context = Json::object()) {
  ChatRequest r;
  r.task_tag = task;
  r.user_prompt = "go";
  r.response_schema = text_schema();
  r.context = std::move(context);
  return r;
}

}  // namespace

TEST_CASE("schema validator covers the supported keywords") {
  Json schema = {{"$defs", {{"kind", {{"enum", {"a", "b"}}}}}},
                 {"type", "object"},
                 {"required", {"items", "kind"}},
                 {"additionalProperties", false},
                 {"properties",
                  {{"items", {{"type", "array"}, {"minItems", 1}, {"maxItems", 2}, {"items", {{"type", "integer"}, {"minimum", 0}}}}},
                   {"kind", {{"$ref", "#/$defs/kind"}}},
                   {"note", {{"type", {"string", "null"}}}}}}};
  CHECK(validate_schema(schema, {{"items", {1}}, {"kind", "a"}}).empty());
  CHECK(validate_schema(schema, {{"items", {1}}, {"kind", "a"}, {"note", nullptr}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"items", Json::array()}, {"kind", "a"}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"items", {1, 2, 3}}, {"kind", "a"}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"items", {-1}}, {"kind", "a"}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"items", {1}}, {"kind", "c"}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"items", {1}}, {"kind", "a"}, {"extra", 1}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"items", {1.5}}, {"kind", "a"}}).empty());
  CHECK_FALSE(validate_schema(schema, {{"kind", "a"}}).empty());
}

TEST_CASE("the repair loop re-asks with the validation error") {
  auto mock = std::make_shared<MockProvider>(8);
  mock->append({{"task", "t"}, {"raw", "not json"}});
  mock->append({{"task", "t"}, {"response", {{"text", ""}}}});
  mock->append({{"task", "t"}, {"response", {{"text", "fine"}}}});
  LlmGateway gw(mock);
  auto result = gw.chat_structured(request("t"));
  CHECK(result.document["text"] == "fine");
  CHECK(result.repair_count == 2);
  auto captured = mock->captured();
  REQUIRE(captured.size() == 3);
  CHECK(captured[1].user_prompt.find("go") == 0);
  CHECK(captured[1].user_prompt.size() > captured[0].user_prompt.size());
}

TEST_CASE("repair exhaustion, document checks and outages are named errors") {
  auto mock = std::make_shared<MockProvider>(8);
  mock->append({{"task", "t"}, {"times", 3}, {"raw", "{}"}});
  mock->append({{"task", "down"}, {"error", "unavailable"}});
  mock->append({{"task", "checked"}, {"response", {{"text", "no"}}}});
  mock->append({{"task", "checked"}, {"response", {{"text", "yes"}}}});
  LlmGateway gw(mock);
  try {
    gw.chat_structured(request("t"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaRepairExhausted);
  }
  try {
    gw.chat_structured(request("down"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderUnavailable);
  }
  auto result = gw.chat_structured(request("checked"), [](const Json& d) {
    return d["text"] == "yes" ? std::string() : std::string("must say yes");
  });
  CHECK(result.document["text"] == "yes");
  try {
    gw.chat_structured(request("nothing scripted"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnmatchedMockRequest);
  }
  CHECK(gw.chat_calls() == 7);  // every provider call counts, repairs included
}

TEST_CASE("mock entries match by glob, count uses and echo context") {
  CHECK(task_matches("agent*", "agent3_extract_running"));
  CHECK(task_matches("*", "x"));
  CHECK_FALSE(task_matches("agent1*", "agent2_extract_anthology"));

  auto mock = std::make_shared<MockProvider>(8);
  mock->append({{"task", "echo*"}, {"times", 0}, {"echo", {{"text", "/plot"}}}});
  LlmGateway gw(mock);
  for (int i = 0; i < 3; ++i) {
    auto r = gw.chat_structured(request("echo_task", {{"plot", "p" + std::to_string(i)}}));
    CHECK(r.document["text"] == "p" + std::to_string(i));
  }
  CHECK(mock->remaining() == 0);
}

TEST_CASE("mock embeddings are deterministic unit vectors") {
  auto a = MockProvider::hash_embedding("hello", 16);
  auto b = MockProvider::hash_embedding("hello", 16);
  auto c = MockProvider::hash_embedding("hello!", 16);
  CHECK(a == b);
  CHECK(a != c);
  double norm = 0;
  for (float v : a.values) norm += double(v) * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));

  auto mock = std::make_shared<MockProvider>(16);
  LlmGateway gw(mock);
  auto vs = gw.embed({"hello", "world"});
  CHECK(vs[0] == a);
  CHECK(gw.embed_calls() == 1);
  CHECK_THROWS_AS(gw.embed({}), Error);
  CHECK_THROWS_AS(gw.embed({""}), Error);
}

TEST_CASE("prompt templates render their placeholders") {
  auto t = PromptTemplate::parse("x", "version: 3\n=== system\nSys {{a}}\n=== user\nUser {{b}}\n");
  CHECK(t.version == 3);
  CHECK(render_placeholders(t.system, {{"a", "one"}, {"b", 2}}).find("Sys one") == 0);
  CHECK(render_placeholders(t.user, {{"a", "one"}, {"b", 2}}).find("User 2") == 0);
  CHECK_THROWS_AS(render_placeholders("{{missing}}", Json::object()), Error);
}

TEST_CASE("every bundled prompt parses") {
  PromptLibrary lib(testing::prompts_dir());
  for (const char* task :
       {"simplify_plot", "resolve_pronouns", "extract_entities", "normalize_mentions", "summarize_episode",
        "summarize_season", "agent1_flag_existing", "agent2_extract_anthology", "agent3_extract_running",
        "agent4_optimize_season", "agent5_deduplicate", "agent6_enhance", "agent7_verify_progressions",
        "agent8_verify_roles", "agent9_final_review", "adjudicate_link", "regenerate_progression"}) {
    CAPTURE(task);
    const auto& t = lib.get(task);
    CHECK(t.version >= 1);
    CHECK_FALSE(t.system.empty());
    CHECK_FALSE(t.user.empty());
  }
  CHECK_THROWS_AS(lib.get("no_such_task"), Error);
}
