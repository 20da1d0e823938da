#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "arcweaver/gateway/gateway.hpp"

namespace arcweaver {

// A versioned prompt template:
//
//   version: 3
//   === system
//   You are ...
//   === user
//   Plot: {{episode_plot}}
//
// `{{name}}` placeholders are filled from a JSON context; strings are inserted
// verbatim, anything else as indented JSON. An unknown placeholder is an error.
struct PromptTemplate {
  std::string task;
  int version = 0;
  std::string system;
  std::string user;

  static PromptTemplate parse(const std::string& task, const std::string& text);
};

std::string render_placeholders(const std::string& text, const Json& context);

class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path directory);

  // Loads `<directory>/<task>.prompt` on first use.
  const PromptTemplate& get(const std::string& task);

  // Builds a request for `task` with both prompts rendered from `context`.
  ChatRequest request(const std::string& task, const Json& context, Json response_schema);

  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
  std::mutex mutex_;
  std::map<std::string, PromptTemplate> cache_;
};

}  // namespace arcweaver
