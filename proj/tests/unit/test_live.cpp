#include "doctest.h"
#include "support.hpp"

#include <thread>

#include "httplib.h"

using namespace arcweaver;

namespace {

// Local stand-in for an OpenAI-compatible endpoint.
struct FakeEndpoint {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mutex;
  std::vector<Json> bodies;
  std::vector<std::string> auth;
  int chat_status = 200;
  std::vector<std::string> replies;  // chat contents, served in order
  Json embedding_reply;
  int embedding_status = 200;

  FakeEndpoint() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      bodies.push_back(Json::parse(req.body));
      auth.push_back(req.get_header_value("Authorization"));
      res.status = chat_status;
      std::string content = replies.empty() ? "{}" : replies.front();
      if (replies.size() > 1) replies.erase(replies.begin());
      Json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      bodies.push_back(Json::parse(req.body));
      auth.push_back(req.get_header_value("Authorization"));
      res.status = embedding_status;
      res.set_content(embedding_reply.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeEndpoint() {
    server.stop();
    thread.join();
  }

  LiveProviderOptions options(std::size_t dimension = 3) const {
    LiveProviderOptions o;
    o.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    o.api_key = "sk-local";
    o.embedding_model = "embed-small";
    o.embedding_dimension = dimension;
    o.timeout_seconds = 5;
    return o;
  }
};

ChatRequest request() {
  ChatRequest r;
  r.task_tag = "summarize_episode";
  r.system_prompt = "You summarize.";
  r.user_prompt = "Plot: things happen.";
  r.response_schema = {{"type", "object"},
                       {"properties", {{"summary", {{"type", "string"}}}}},
                       {"required", {"summary"}},
                       {"additionalProperties", false}};
  return r;
}

}  // namespace

TEST_CASE("chat requests carry the bearer token and a json_schema response format") {
  FakeEndpoint fake;
  fake.replies = {R"({"summary": "Things happen."})"};
  LlmGateway gw(std::make_shared<LiveProvider>(fake.options()), {.default_model = "gpt-test"});
  auto result = gw.chat_structured(request());
  CHECK(result.document == Json{{"summary", "Things happen."}});
  REQUIRE(fake.bodies.size() == 1);
  const auto& body = fake.bodies[0];
  CHECK(fake.auth[0] == "Bearer sk-local");
  CHECK(body["model"] == "gpt-test");
  CHECK(body["messages"][0] == Json{{"role", "system"}, {"content", "You summarize."}});
  CHECK(body["messages"][1]["role"] == "user");
  CHECK(body["response_format"]["type"] == "json_schema");
  CHECK(body["response_format"]["json_schema"]["name"] == "summarize_episode");
  CHECK(body["response_format"]["json_schema"]["schema"] == request().response_schema);
}

TEST_CASE("malformed live output goes through the repair loop") {
  FakeEndpoint fake;
  fake.replies = {"not json", R"({"summary": 3})", R"({"summary": "ok"})"};
  LlmGateway gw(std::make_shared<LiveProvider>(fake.options()));
  auto result = gw.chat_structured(request());
  CHECK(result.repair_count == 2);
  CHECK(result.document["summary"] == "ok");
  CHECK(fake.bodies.size() == 3);
}

TEST_CASE("http failures surface as ProviderUnavailable") {
  for (int status : {500, 401, 429, 404}) {
    CAPTURE(status);
    FakeEndpoint fake;
    fake.chat_status = status;
    LlmGateway gw(std::make_shared<LiveProvider>(fake.options()));
    try {
      gw.chat_structured(request());
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ProviderUnavailable);
    }
  }
  LiveProviderOptions closed;
  closed.base_url = "http://127.0.0.1:1/v1";
  closed.api_key = "k";
  closed.timeout_seconds = 1;
  LlmGateway gw(std::make_shared<LiveProvider>(closed));
  CHECK_THROWS_AS(gw.embed({"x"}), Error);
}

TEST_CASE("embeddings are placed by index and checked for dimension") {
  FakeEndpoint fake;
  fake.embedding_reply = {{"data",
                           {{{"index", 1}, {"embedding", {0.0, 1.0, 0.0}}},
                            {{"index", 0}, {"embedding", {1.0, 0.0, 0.0}}}}}};
  LlmGateway gw(std::make_shared<LiveProvider>(fake.options()));
  auto v = gw.embed({"a", "b"});
  CHECK(v[0].values == std::vector<float>{1, 0, 0});
  CHECK(v[1].values == std::vector<float>{0, 1, 0});
  CHECK(fake.bodies[0] == Json{{"model", "embed-small"}, {"input", {"a", "b"}}});

  LlmGateway wide(std::make_shared<LiveProvider>(fake.options(4)));
  try {
    wide.embed({"a", "b"});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  fake.embedding_status = 503;
  CHECK_THROWS_AS(gw.embed({"a"}), Error);
}

TEST_CASE("a live provider needs a key") {
  LiveProviderOptions o;
  CHECK_THROWS_AS(LiveProvider{o}, Error);
}
