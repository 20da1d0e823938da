#pragma once
// Configuration file, environment overrides and the wiring shared by the CLI
// and the HTTP service.
//
//   store = "arcweaver.db"          # relative paths resolve against the file
//   prompts_dir = "prompts"
//   runs_dir = "runs"
//   ids = "derived"                 # or "random"; default follows provider kind
//
//   [server]
//   listen = "127.0.0.1:8080"
//   cors_origin = "*"
//
//   [provider]
//   kind = "mock"                   # or "live"
//   fixture = "script.json"
//   api_key = "..."
//   base_url = "https://api.openai.com/v1"
//   model = "gpt-4o-mini"
//   embedding_model = "text-embedding-3-small"
//   embedding_dimension = 64
//   max_repair_attempts = 2
//
//   [provider.models]               # per-task model overrides
//   agent9_final_review = "gpt-4o"
//
//   [semantic]
//   top_k = 5
//   min_similarity = 0.80
//   cluster_threshold = 0.85
//
//   [preprocessing]
//   window = 15
//
// Environment beats the file: PROVIDER_KIND, PROVIDER_API_KEY,
// PROVIDER_FIXTURE, PROVIDER_BASE_URL, ARCWEAVER_STORE, ARCWEAVER_LISTEN,
// ARCWEAVER_PROMPTS, ARCWEAVER_RUNS, ARCWEAVER_CORS_ORIGIN.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "arcweaver/core/ids.hpp"
#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"
#include "arcweaver/gateway/prompts.hpp"
#include "arcweaver/persistence/store.hpp"
#include "arcweaver/pipeline/pipeline.hpp"
#include "arcweaver/preprocessing/preprocess.hpp"
#include "arcweaver/semantic/semantic.hpp"

namespace arcweaver {

// Tables, dotted table headers, strings, integers, floats, booleans and
// one-line arrays of those. Throws Error(Config) with the line number.
Json parse_toml(std::string_view text);

struct ProviderConfig {
  std::string kind = "mock";
  std::string fixture;
  std::string api_key;
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string embedding_model = "text-embedding-3-small";
  std::size_t embedding_dimension = 64;
  int timeout_seconds = 120;
  int max_repair_attempts = 2;
  std::map<std::string, std::string> task_models;
};

struct Config {
  std::string store_path = "arcweaver.db";
  std::string prompts_dir;
  std::string runs_dir = "runs";
  std::string ids;  // "derived" | "random"; empty = derived for mock, random for live
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string cors_origin = "*";
  ProviderConfig provider;
  semantic::SemanticOptions semantic;
  int window = preprocess::kDefaultWindow;

  IdGenerator::Mode id_mode() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Defaults, then the file (if any), then the environment.
Config load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env);

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config);

// Series metadata file next to the episode texts: name = "...", genre = "...".
SeriesInfo read_series_file(const std::filesystem::path& path);

// Everything one process needs, built from a Config.
struct Engine {
  explicit Engine(Config config);

  Config config;
  Store store;
  std::shared_ptr<ChatProvider> provider;
  LlmGateway gateway;
  PromptLibrary prompts;
  IdGenerator ids;
  semantic::SemanticStore semantic;
  preprocess::Preprocessor preprocessor;
  pipeline::ArcPipeline pipeline;
};

}  // namespace arcweaver
