#pragma once
// All generative-model and embedding calls go through LlmGateway. Providers
// only move text; the gateway owns schema validation and the repair loop.

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace arcweaver {

using Json = nlohmann::json;

struct ChatRequest {
  std::string task_tag;
  std::string system_prompt;
  std::string user_prompt;
  Json response_schema;
  double temperature = 0.0;
  // Template variables the prompts were rendered from; kept structured so
  // the mock can echo parts of the input back.
  Json context = Json::object();
};

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

struct ChatResult {
  Json document;
  int repair_count = 0;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  // Raw model text for the request; may be malformed.
  virtual std::string complete(const ChatRequest& request, const std::string& model) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::size_t embedding_dimension() const = 0;
  virtual std::string kind() const = 0;
};

struct GatewayOptions {
  int max_repair_attempts = 2;
  std::string default_model = "default";
  std::map<std::string, std::string> model_overrides;  // task_tag -> model
};

// Extra semantic check run after schema validation; returns an error
// message, or an empty string when the document is acceptable.
using DocumentCheck = std::function<std::string(const Json&)>;

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options = {});

  // Requests a document conforming to request.response_schema (and `check`,
  // if given). Invalid output is re-asked up to max_repair_attempts times
  // with the validation error appended to the user prompt.
  // Throws Error(ProviderUnavailable | SchemaRepairExhausted | UnmatchedMockRequest).
  ChatResult chat_structured(const ChatRequest& request, const DocumentCheck& check = {});

  // One vector per text, all of embedding_dimension(). An empty list or an
  // empty text is a precondition error.
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

  std::size_t embedding_dimension() const { return provider_->embedding_dimension(); }
  const GatewayOptions& options() const { return options_; }
  ChatProvider& provider() { return *provider_; }

  std::size_t chat_calls() const { return chat_calls_.load(); }
  std::size_t embed_calls() const { return embed_calls_.load(); }

 private:
  std::string model_for(const std::string& task) const;

  std::shared_ptr<ChatProvider> provider_;
  GatewayOptions options_;
  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

// Scripted offline provider.
//
// Script file: {"entries": [entry, ...]} or a bare array. Each entry has a
// "task" matcher (exact tag, '*' wildcards allowed), an optional "times"
// (default 1, 0 = unlimited) and exactly one of:
//   "response": JSON document returned verbatim (serialized),
//   "raw":      string returned as-is (for malformed output),
//   "echo":     object whose string values are JSON pointers into the
//               request context, e.g. {"text": "/raw_plot"},
//   "error":    "unavailable" to simulate a provider outage.
// A request takes the first entry, in file order, that matches its task and
// still has uses left. No match is an UnmatchedMockRequest error.
//
// Embeddings are hash-seeded: the FNV-1a hash of the text seeds a splitmix64
// stream whose outputs, mapped to [-1, 1), are normalized to unit length.
class MockProvider final : public ChatProvider {
 public:
  explicit MockProvider(std::size_t dimension = 64);

  static std::shared_ptr<MockProvider> from_file(const std::filesystem::path& path,
                                                 std::size_t dimension = 64);
  void load_script(const Json& script);
  void append(Json entry);

  std::string complete(const ChatRequest& request, const std::string& model) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::size_t embedding_dimension() const override { return dimension_; }
  std::string kind() const override { return "mock"; }

  std::vector<ChatRequest> captured() const;
  std::size_t consumed() const;
  std::size_t remaining() const;  // uses left on bounded entries

  // Deterministic embedding used by the mock, exposed for tests.
  static EmbeddingVector hash_embedding(const std::string& text, std::size_t dimension);

 private:
  struct Entry {
    std::string task;
    int times = 1;
    int used = 0;
    Json spec;
  };

  mutable std::mutex mutex_;
  std::size_t dimension_;
  std::vector<Entry> entries_;
  std::vector<ChatRequest> captured_;
  std::size_t consumed_ = 0;
};

bool task_matches(const std::string& pattern, const std::string& task);

// OpenAI-compatible HTTP provider: POST {base_url}/chat/completions with a
// json_schema response_format, POST {base_url}/embeddings.
struct LiveProviderOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string embedding_model = "text-embedding-3-small";
  std::size_t embedding_dimension = 1536;
  int timeout_seconds = 120;
};

class LiveProvider final : public ChatProvider {
 public:
  explicit LiveProvider(LiveProviderOptions options);

  std::string complete(const ChatRequest& request, const std::string& model) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::size_t embedding_dimension() const override { return options_.embedding_dimension; }
  std::string kind() const override { return "live"; }

 private:
  Json post(const std::string& path, const Json& body);

  LiveProviderOptions options_;
};

}  // namespace arcweaver
