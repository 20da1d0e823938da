#include "arcweaver/gateway/prompts.hpp"

#include <fstream>
#include <sstream>

#include "arcweaver/core/error.hpp"

namespace arcweaver {

PromptTemplate PromptTemplate::parse(const std::string& task, const std::string& text) {
  PromptTemplate t;
  t.task = task;
  std::istringstream in(text);
  std::string line;
  std::string* section = nullptr;
  bool saw_version = false;
  while (std::getline(in, line)) {
    if (line.rfind("version:", 0) == 0 && section == nullptr) {
      t.version = std::stoi(line.substr(8));
      saw_version = true;
    } else if (line == "=== system") {
      section = &t.system;
    } else if (line == "=== user") {
      section = &t.user;
    } else if (section != nullptr) {
      *section += line;
      *section += '\n';
    }
  }
  if (!saw_version || t.user.empty()) {
    fail(ErrorCode::Config, "prompt template '" + task + "' needs a version line and a user section");
  }
  while (!t.system.empty() && t.system.back() == '\n') t.system.pop_back();
  while (!t.user.empty() && t.user.back() == '\n') t.user.pop_back();
  return t;
}

std::string render_placeholders(const std::string& text, const Json& context) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(text, pos, open - pos);
    std::string name = text.substr(open + 2, close - open - 2);
    auto it = context.find(name);
    if (it == context.end()) fail(ErrorCode::Config, "prompt placeholder '" + name + "' has no value");
    out += it->is_string() ? it->get<std::string>() : it->dump(2);
    pos = close + 2;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

PromptLibrary::PromptLibrary(std::filesystem::path directory) : directory_(std::move(directory)) {}

const PromptTemplate& PromptLibrary::get(const std::string& task) {
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(task); it != cache_.end()) return it->second;
  auto path = directory_ / (task + ".prompt");
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Config, "missing prompt template " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return cache_.emplace(task, PromptTemplate::parse(task, buffer.str())).first->second;
}

ChatRequest PromptLibrary::request(const std::string& task, const Json& context,
                                   Json response_schema) {
  const auto& t = get(task);
  ChatRequest req;
  req.task_tag = task;
  req.system_prompt = render_placeholders(t.system, context);
  req.user_prompt = render_placeholders(t.user, context);
  req.response_schema = std::move(response_schema);
  req.context = context;
  req.context["prompt_version"] = t.version;
  return req;
}

}  // namespace arcweaver
