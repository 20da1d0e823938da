#include "arcweaver/config/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "arcweaver/core/error.hpp"

#ifndef ARCWEAVER_PROMPTS_DIR
#define ARCWEAVER_PROMPTS_DIR "prompts"
#endif

namespace arcweaver {
namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text) : text_(text) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    std::size_t start = 0;
    while (start <= text_.size()) {
      auto end = text_.find('\n', start);
      if (end == std::string_view::npos) end = text_.size();
      ++line_;
      line_text_ = text_.substr(start, end - start);
      pos_ = 0;
      skip_space();
      if (!at_end() && peek() != '#') {
        if (peek() == '[') {
          table = &open_table(root);
        } else {
          auto key = parse_key();
          skip_space();
          expect('=');
          skip_space();
          auto value = parse_value();
          if (table->contains(key)) error("duplicate key '" + key + "'");
          (*table)[key] = std::move(value);
        }
        skip_space();
        if (!at_end() && peek() != '#') error("unexpected text after value");
      }
      start = end + 1;
    }
    return root;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::Config, "config line " + std::to_string(line_) + ": " + what);
  }
  bool at_end() const { return pos_ >= line_text_.size(); }
  char peek() const { return line_text_[pos_]; }
  void skip_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }
  void expect(char c) {
    if (at_end() || peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }

  Json& open_table(Json& root) {
    expect('[');
    Json* t = &root;
    while (true) {
      skip_space();
      auto key = parse_key();
      if (!t->contains(key)) (*t)[key] = Json::object();
      t = &(*t)[key];
      if (!t->is_object()) error("'" + key + "' is not a table");
      skip_space();
      if (!at_end() && peek() == '.') {
        ++pos_;
        continue;
      }
      break;
    }
    expect(']');
    return *t;
  }

  std::string parse_key() {
    if (!at_end() && (peek() == '"' || peek() == '\'')) return parse_string();
    std::string key;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
      key += line_text_[pos_++];
    }
    if (key.empty()) error("expected a key");
    return key;
  }

  std::string parse_string() {
    const char quote = line_text_[pos_++];
    std::string out;
    while (true) {
      if (at_end()) error("unterminated string");
      char c = line_text_[pos_++];
      if (c == quote) return out;
      if (c == '\\' && quote == '"') {
        if (at_end()) error("unterminated escape");
        char e = line_text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: error(std::string("unknown escape \\") + e);
        }
        continue;
      }
      out += c;
    }
  }

  Json parse_value() {
    if (at_end()) error("missing value");
    char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') {
      ++pos_;
      Json arr = Json::array();
      while (true) {
        skip_space();
        if (at_end()) error("unterminated array");
        if (peek() == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(parse_value());
        skip_space();
        if (!at_end() && peek() == ',') ++pos_;
        else if (at_end() || peek() != ']') error("expected ',' or ']'");
      }
    }
    std::string word;
    while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
           peek() != '#') {
      word += line_text_[pos_++];
    }
    if (word == "true") return true;
    if (word == "false") return false;
    std::string digits;
    for (char ch : word) {
      if (ch != '_') digits += ch;
    }
    if (digits.empty()) error("missing value");
    char* endp = nullptr;
    if (digits.find_first_of(".eE") == std::string::npos) {
      long long v = std::strtoll(digits.c_str(), &endp, 10);
      if (*endp == '\0') return v;
    } else {
      double v = std::strtod(digits.c_str(), &endp);
      if (*endp == '\0') return v;
    }
    error("cannot parse value '" + word + "'");
  }

  std::string_view text_;
  std::string_view line_text_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Config, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
void take(const Json& table, const char* key, T& out, const std::string& where) {
  if (!table.is_object() || !table.contains(key)) return;
  try {
    out = table.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::Config, "config: " + where + "." + key + " has the wrong type");
  }
}

std::string resolve_path(const std::string& value, const std::filesystem::path& base) {
  if (value.empty() || value == ":memory:") return value;
  std::filesystem::path p(value);
  if (p.is_absolute() || base.empty()) return value;
  return (base / p).lexically_normal().string();
}

void parse_listen(const std::string& value, Config& c) {
  auto colon = value.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::Config, "listen address must look like host:port, got " + value);
  c.listen_host = value.substr(0, colon);
  try {
    std::size_t used = 0;
    c.listen_port = std::stoi(value.substr(colon + 1), &used);
    if (used != value.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    fail(ErrorCode::Config, "invalid port in listen address " + value);
  }
  if (c.listen_port < 0 || c.listen_port > 65535) fail(ErrorCode::Config, "port out of range in " + value);
}

}  // namespace

Json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

IdGenerator::Mode Config::id_mode() const {
  if (ids == "derived") return IdGenerator::Mode::Derived;
  if (ids == "random") return IdGenerator::Mode::Random;
  return provider.kind == "mock" ? IdGenerator::Mode::Derived : IdGenerator::Mode::Random;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

Config load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  Config c;
  c.prompts_dir = ARCWEAVER_PROMPTS_DIR;
  if (file) {
    const auto doc = parse_toml(read_file(*file));
    const auto base = file->parent_path();
    take(doc, "store", c.store_path, "root");
    take(doc, "prompts_dir", c.prompts_dir, "root");
    take(doc, "runs_dir", c.runs_dir, "root");
    take(doc, "ids", c.ids, "root");
    if (doc.contains("store")) c.store_path = resolve_path(c.store_path, base);
    if (doc.contains("prompts_dir")) c.prompts_dir = resolve_path(c.prompts_dir, base);
    if (doc.contains("runs_dir")) c.runs_dir = resolve_path(c.runs_dir, base);

    if (doc.contains("server")) {
      const auto& s = doc["server"];
      std::string listen;
      take(s, "listen", listen, "server");
      if (!listen.empty()) parse_listen(listen, c);
      take(s, "cors_origin", c.cors_origin, "server");
    }
    if (doc.contains("provider")) {
      const auto& p = doc["provider"];
      take(p, "kind", c.provider.kind, "provider");
      take(p, "fixture", c.provider.fixture, "provider");
      c.provider.fixture = resolve_path(c.provider.fixture, base);
      take(p, "api_key", c.provider.api_key, "provider");
      take(p, "base_url", c.provider.base_url, "provider");
      take(p, "model", c.provider.model, "provider");
      take(p, "embedding_model", c.provider.embedding_model, "provider");
      take(p, "embedding_dimension", c.provider.embedding_dimension, "provider");
      take(p, "timeout_seconds", c.provider.timeout_seconds, "provider");
      take(p, "max_repair_attempts", c.provider.max_repair_attempts, "provider");
      if (p.contains("models")) {
        for (const auto& [task, model] : p["models"].items()) {
          if (!model.is_string()) fail(ErrorCode::Config, "config: provider.models." + task + " must be a string");
          c.provider.task_models[task] = model.get<std::string>();
        }
      }
    }
    if (doc.contains("semantic")) {
      const auto& s = doc["semantic"];
      take(s, "top_k", c.semantic.top_k, "semantic");
      take(s, "min_similarity", c.semantic.min_similarity, "semantic");
      take(s, "cluster_threshold", c.semantic.cluster_threshold, "semantic");
    }
    if (doc.contains("preprocessing")) take(doc["preprocessing"], "window", c.window, "preprocessing");
  }

  if (auto v = env("PROVIDER_KIND")) c.provider.kind = *v;
  if (auto v = env("PROVIDER_API_KEY")) c.provider.api_key = *v;
  if (auto v = env("PROVIDER_FIXTURE")) c.provider.fixture = *v;
  if (auto v = env("PROVIDER_BASE_URL")) c.provider.base_url = *v;
  if (auto v = env("ARCWEAVER_STORE")) c.store_path = *v;
  if (auto v = env("ARCWEAVER_LISTEN")) parse_listen(*v, c);
  if (auto v = env("ARCWEAVER_PROMPTS")) c.prompts_dir = *v;
  if (auto v = env("ARCWEAVER_RUNS")) c.runs_dir = *v;
  if (auto v = env("ARCWEAVER_CORS_ORIGIN")) c.cors_origin = *v;

  if (c.provider.kind != "mock" && c.provider.kind != "live") {
    fail(ErrorCode::Config, "provider kind must be 'mock' or 'live', got '" + c.provider.kind + "'");
  }
  if (!c.ids.empty() && c.ids != "derived" && c.ids != "random") {
    fail(ErrorCode::Config, "ids must be 'derived' or 'random', got '" + c.ids + "'");
  }
  if (c.provider.embedding_dimension == 0) fail(ErrorCode::Config, "embedding_dimension must be positive");
  if (c.provider.max_repair_attempts < 0) fail(ErrorCode::Config, "max_repair_attempts must not be negative");
  if (c.window <= 0) fail(ErrorCode::Config, "preprocessing window must be positive");
  if (c.semantic.top_k == 0) fail(ErrorCode::Config, "semantic.top_k must be positive");
  return c;
}

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config) {
  if (config.kind == "mock") {
    if (config.fixture.empty()) return std::make_shared<MockProvider>(config.embedding_dimension);
    if (!std::filesystem::exists(config.fixture)) {
      fail(ErrorCode::Config, "mock fixture " + config.fixture + " does not exist");
    }
    return MockProvider::from_file(config.fixture, config.embedding_dimension);
  }
  if (config.api_key.empty()) fail(ErrorCode::Config, "the live provider needs PROVIDER_API_KEY");
  LiveProviderOptions o;
  o.base_url = config.base_url;
  o.api_key = config.api_key;
  o.embedding_model = config.embedding_model;
  o.embedding_dimension = config.embedding_dimension;
  o.timeout_seconds = config.timeout_seconds;
  return std::make_shared<LiveProvider>(o);
}

SeriesInfo read_series_file(const std::filesystem::path& path) {
  const auto doc = parse_toml(read_file(path));
  SeriesInfo info;
  take(doc, "name", info.name, "series");
  take(doc, "genre", info.genre, "series");
  if (info.name.empty()) fail(ErrorCode::Config, path.string() + ": series name is missing");
  return info;
}

namespace {
GatewayOptions gateway_options(const Config& c) {
  GatewayOptions o;
  o.max_repair_attempts = c.provider.max_repair_attempts;
  o.default_model = c.provider.model;
  o.model_overrides = c.provider.task_models;
  return o;
}
}  // namespace

Engine::Engine(Config cfg)
    : config(std::move(cfg)),
      store(config.store_path),
      provider(make_provider(config.provider)),
      gateway(provider, gateway_options(config)),
      prompts(config.prompts_dir),
      ids(config.id_mode()),
      semantic(store, gateway, prompts, config.semantic),
      preprocessor(gateway, prompts, config.window),
      pipeline(store, gateway, prompts, semantic, ids,
               pipeline::PipelineOptions{config.runs_dir.empty() ? std::nullopt
                                                                  : std::optional<std::filesystem::path>(config.runs_dir),
                                         "pipeline"}) {}

}  // namespace arcweaver
