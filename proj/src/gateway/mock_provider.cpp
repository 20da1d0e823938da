#include <cmath>
#include <fstream>

#include "arcweaver/core/error.hpp"
#include "arcweaver/core/ids.hpp"
#include "arcweaver/gateway/gateway.hpp"

namespace arcweaver {

bool task_matches(const std::string& pattern, const std::string& task) {
  // iterative glob with '*' only
  std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
  while (t < task.size()) {
    if (p < pattern.size() && pattern[p] == task[t]) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

MockProvider::MockProvider(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) fail(ErrorCode::Config, "mock embedding dimension must be positive");
}

std::shared_ptr<MockProvider> MockProvider::from_file(const std::filesystem::path& path,
                                                      std::size_t dimension) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Config, "cannot open mock script " + path.string());
  Json script = Json::parse(in, nullptr, false);
  if (script.is_discarded()) fail(ErrorCode::Config, "mock script is not JSON: " + path.string());
  auto mock = std::make_shared<MockProvider>(dimension);
  mock->load_script(script);
  return mock;
}

void MockProvider::load_script(const Json& script) {
  const Json& entries = script.is_array() ? script : script.at("entries");
  for (const auto& e : entries) append(e);
}

void MockProvider::append(Json entry) {
  if (!entry.is_object() || !entry.contains("task") || !entry["task"].is_string()) {
    fail(ErrorCode::Config, "mock entry needs a string 'task': " + entry.dump());
  }
  int kinds = 0;
  for (const char* k : {"response", "raw", "echo", "error"}) kinds += entry.contains(k) ? 1 : 0;
  if (kinds != 1) {
    fail(ErrorCode::Config,
         "mock entry needs exactly one of response/raw/echo/error: " + entry.dump());
  }
  std::lock_guard lock(mutex_);
  Entry e;
  e.task = entry["task"].get<std::string>();
  e.times = entry.value("times", 1);
  e.spec = std::move(entry);
  entries_.push_back(std::move(e));
}

std::string MockProvider::complete(const ChatRequest& request, const std::string& /*model*/) {
  std::lock_guard lock(mutex_);
  captured_.push_back(request);
  for (auto& e : entries_) {
    if ((e.times != 0 && e.used >= e.times) || !task_matches(e.task, request.task_tag)) continue;
    ++e.used;
    ++consumed_;
    const Json& spec = e.spec;
    if (spec.contains("error")) {
      fail(ErrorCode::ProviderUnavailable,
           "mock provider outage for task '" + request.task_tag + "'");
    }
    if (spec.contains("raw")) return spec["raw"].get<std::string>();
    if (spec.contains("response")) return spec["response"].dump();
    Json doc = Json::object();
    for (const auto& [field, pointer] : spec["echo"].items()) {
      Json::json_pointer ptr(pointer.get<std::string>());
      if (!request.context.contains(ptr)) {
        fail(ErrorCode::UnmatchedMockRequest, "echo pointer " + pointer.get<std::string>() +
                                                  " missing from context of '" +
                                                  request.task_tag + "'");
      }
      doc[field] = request.context.at(ptr);
    }
    return doc.dump();
  }
  fail(ErrorCode::UnmatchedMockRequest,
       "no mock script entry left for task '" + request.task_tag + "'");
}

EmbeddingVector MockProvider::hash_embedding(const std::string& text, std::size_t dimension) {
  std::uint64_t state = fnv1a64(text);
  EmbeddingVector v;
  v.values.resize(dimension);
  double norm2 = 0.0;
  for (auto& x : v.values) {
    // top 53 bits -> [0, 1) -> [-1, 1)
    double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    x = static_cast<float>(2.0 * u - 1.0);
    norm2 += static_cast<double>(x) * x;
  }
  if (norm2 == 0.0) {
    v.values[0] = 1.0F;
    return v;
  }
  const double scale = 1.0 / std::sqrt(norm2);
  for (auto& x : v.values) x = static_cast<float>(x * scale);
  return v;
}

std::vector<EmbeddingVector> MockProvider::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_embedding(t, dimension_));
  return out;
}

std::vector<ChatRequest> MockProvider::captured() const {
  std::lock_guard lock(mutex_);
  return captured_;
}

std::size_t MockProvider::consumed() const {
  std::lock_guard lock(mutex_);
  return consumed_;
}

std::size_t MockProvider::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t left = 0;
  for (const auto& e : entries_) {
    if (e.times > 0) left += static_cast<std::size_t>(e.times - e.used);
  }
  return left;
}

}  // namespace arcweaver
