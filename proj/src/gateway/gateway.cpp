#include "arcweaver/gateway/gateway.hpp"

#include "arcweaver/core/error.hpp"
#include "arcweaver/gateway/schema.hpp"

namespace arcweaver {
namespace {

// Models sometimes wrap JSON in a fenced block.
std::string strip_fences(const std::string& text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text.compare(first, 3, "```") != 0) return text;
  auto body = text.find('\n', first);
  auto close = text.rfind("```");
  if (body == std::string::npos || close <= body) return text;
  return text.substr(body + 1, close - body - 1);
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (std::size_t i = 0; i < errors.size() && i < 8; ++i) {
    if (i) out += "; ";
    out += errors[i];
  }
  if (errors.size() > 8) out += "; ...";
  return out;
}

}  // namespace

LlmGateway::LlmGateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options)
    : provider_(std::move(provider)), options_(std::move(options)) {
  if (!provider_) fail(ErrorCode::Config, "gateway requires a provider");
  if (options_.max_repair_attempts < 0) options_.max_repair_attempts = 0;
}

std::string LlmGateway::model_for(const std::string& task) const {
  auto it = options_.model_overrides.find(task);
  return it == options_.model_overrides.end() ? options_.default_model : it->second;
}

ChatResult LlmGateway::chat_structured(const ChatRequest& request, const DocumentCheck& check) {
  require(!request.response_schema.is_null() && !request.response_schema.empty(),
          "chat request '" + request.task_tag + "' has no response schema");
  require(request.temperature >= 0.0 && request.temperature <= 1.0,
          "temperature must lie in [0, 1]");

  ChatRequest attempt = request;
  const std::string model = model_for(request.task_tag);
  std::string last_error;
  for (int round = 0; round <= options_.max_repair_attempts; ++round) {
    ++chat_calls_;
    std::string raw = provider_->complete(attempt, model);

    Json doc = Json::parse(strip_fences(raw), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
      last_error = "reply is not valid JSON";
    } else if (auto errors = validate_schema(request.response_schema, doc); !errors.empty()) {
      last_error = join_errors(errors);
    } else if (std::string semantic = check ? check(doc) : std::string{}; !semantic.empty()) {
      last_error = semantic;
    } else {
      return {std::move(doc), round};
    }

    attempt.user_prompt = request.user_prompt +
                          "\n\nYour previous reply was rejected: " + last_error +
                          "\nReply again with only a JSON document that satisfies the "
                          "response schema.";
  }
  fail(ErrorCode::SchemaRepairExhausted,
       "task '" + request.task_tag + "' still invalid after " +
           std::to_string(options_.max_repair_attempts) + " repair attempts: " + last_error);
}

std::vector<EmbeddingVector> LlmGateway::embed(const std::vector<std::string>& texts) {
  require(!texts.empty(), "embed requires at least one text");
  for (const auto& t : texts) require(!t.empty(), "embed requires non-empty texts");
  ++embed_calls_;
  auto vectors = provider_->embed(texts);
  if (vectors.size() != texts.size()) {
    fail(ErrorCode::ProviderUnavailable, "provider returned " + std::to_string(vectors.size()) +
                                             " embeddings for " + std::to_string(texts.size()) +
                                             " texts");
  }
  for (const auto& v : vectors) {
    if (v.dimension() != provider_->embedding_dimension()) {
      fail(ErrorCode::DimensionMismatch, "provider returned a vector of dimension " +
                                             std::to_string(v.dimension()));
    }
    bool nonzero = false;
    for (float x : v.values) nonzero = nonzero || x != 0.0F;
    if (!nonzero) fail(ErrorCode::ZeroVector, "provider returned a zero embedding");
  }
  return vectors;
}

}  // namespace arcweaver
