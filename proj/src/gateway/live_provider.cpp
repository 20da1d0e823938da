#include "httplib.h"

#include "arcweaver/core/error.hpp"
#include "arcweaver/gateway/gateway.hpp"

namespace arcweaver {
namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::Config, "base_url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

}  // namespace

LiveProvider::LiveProvider(LiveProviderOptions options) : options_(std::move(options)) {
  if (options_.api_key.empty()) fail(ErrorCode::Config, "live provider requires an API key");
  split_url(options_.base_url);
}

Json LiveProvider::post(const std::string& path, const Json& body) {
  Endpoint ep = split_url(options_.base_url);
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(options_.timeout_seconds);
  client.set_read_timeout(options_.timeout_seconds);
  client.set_bearer_token_auth(options_.api_key);

  auto res = client.Post(ep.path_prefix + path, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::ProviderUnavailable,
         "request to " + options_.base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403 || res->status >= 500 || res->status == 429) {
    fail(ErrorCode::ProviderUnavailable,
         "provider answered HTTP " + std::to_string(res->status) + " for " + path);
  }
  Json reply = Json::parse(res->body, nullptr, false);
  if (res->status != 200 || reply.is_discarded()) {
    fail(ErrorCode::ProviderUnavailable,
         "unexpected provider reply (HTTP " + std::to_string(res->status) + ") for " + path);
  }
  return reply;
}

std::string LiveProvider::complete(const ChatRequest& request, const std::string& model) {
  Json body = {
      {"model", model},
      {"temperature", request.temperature},
      {"messages",
       Json::array({{{"role", "system"}, {"content", request.system_prompt}},
                    {{"role", "user"}, {"content", request.user_prompt}}})},
      {"response_format",
       {{"type", "json_schema"},
        {"json_schema", {{"name", request.task_tag}, {"schema", request.response_schema}}}}},
  };
  Json reply = post("/chat/completions", body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception&) {
    // Let the gateway's repair loop see it as malformed output.
    return {};
  }
}

std::vector<EmbeddingVector> LiveProvider::embed(const std::vector<std::string>& texts) {
  Json body = {{"model", options_.embedding_model}, {"input", texts}};
  Json reply = post("/embeddings", body);
  std::vector<EmbeddingVector> out(texts.size());
  try {
    for (const auto& item : reply.at("data")) {
      auto index = item.value("index", std::size_t{0});
      if (index >= out.size()) continue;
      out[index].values = item.at("embedding").get<std::vector<float>>();
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::ProviderUnavailable, std::string("malformed embedding reply: ") + e.what());
  }
  return out;
}

}  // namespace arcweaver
