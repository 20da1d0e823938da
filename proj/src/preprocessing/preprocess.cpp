#include "arcweaver/preprocessing/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "arcweaver/core/error.hpp"
#include "arcweaver/registry/registry.hpp"

namespace arcweaver::preprocess {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

Json text_schema(const char* field) {
  return {{"type", "object"},
          {"required", {field}},
          {"additionalProperties", false},
          {"properties", {{field, {{"type", "string"}, {"minLength", 1}}}}}};
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminal(text[i])) continue;
    if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
    if (auto s = trim(text.substr(start, i + 1 - start)); !s.empty()) out.push_back(std::move(s));
    start = i + 1;
  }
  if (auto s = trim(text.substr(std::min(start, text.size()))); !s.empty()) out.push_back(std::move(s));
  return out;
}

std::string join_sentences(const std::vector<std::string>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::vector<SentenceWindow> partition_windows(const std::vector<std::string>& sentences,
                                              int window_size) {
  require(window_size > 0, "window size must be positive");
  std::vector<SentenceWindow> out;
  const auto n = sentences.size();
  const auto w = static_cast<std::size_t>(window_size);
  for (std::size_t first = 0; first < n; first += w) {
    SentenceWindow win;
    auto last = std::min(n, first + w);
    win.sentences.assign(sentences.begin() + static_cast<std::ptrdiff_t>(first),
                         sentences.begin() + static_cast<std::ptrdiff_t>(last));
    win.first_index = static_cast<int>(first);
    win.center_index = static_cast<int>(win.sentences.size() / 2);
    win.window_size = window_size;
    out.push_back(std::move(win));
  }
  return out;
}

Preprocessor::Preprocessor(LlmGateway& gateway, PromptLibrary& prompts, int window_size)
    : gateway_(gateway), prompts_(prompts), window_size_(window_size) {}

EpisodeDoc Preprocessor::simplify_plot(EpisodeDoc doc) {
  require(!trim(doc.raw_plot).empty(), "simplify_plot: raw plot of " + doc.key.code() + " is empty");
  Json context = {{"series", doc.key.series}, {"episode", doc.key.code()}, {"raw_plot", doc.raw_plot}};
  auto result = gateway_.chat_structured(prompts_.request("simplify_plot", context, text_schema("text")));
  doc.simplified_plot = result.document["text"].get<std::string>();
  doc.normalized_plot.clear();
  doc.episode_summary.clear();
  return doc;
}

EpisodeDoc Preprocessor::resolve_pronouns(EpisodeDoc doc) {
  require(!doc.simplified_plot.empty(),
          "resolve_pronouns: simplified plot of " + doc.key.code() + " is empty");
  auto sentences = split_sentences(doc.simplified_plot);
  auto windows = partition_windows(sentences, window_size_);

  std::vector<std::string> rewritten;
  rewritten.reserve(sentences.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    const auto count = win.sentences.size();
    Json schema = {{"type", "object"},
                   {"required", {"sentences"}},
                   {"additionalProperties", false},
                   {"properties",
                    {{"sentences",
                      {{"type", "array"},
                       {"minItems", count},
                       {"maxItems", count},
                       {"items", {{"type", "string"}, {"minLength", 1}}}}}}}};
    Json context = {{"series", doc.key.series},
                    {"episode", doc.key.code()},
                    {"sentences", win.sentences},
                    {"center_index", win.center_index},
                    {"center_sentence", win.sentences[static_cast<std::size_t>(win.center_index)]},
                    {"window_index", w},
                    {"window_count", windows.size()}};
    auto check = [&](const Json& reply) -> std::string {
      const auto& out = reply["sentences"];
      for (std::size_t i = 0; i < count; ++i) {
        const auto s = out[i].get<std::string>();
        if (split_sentences(s).size() != 1) {
          return "sentence " + std::to_string(i) + " must stay a single sentence";
        }
        const auto& original = win.sentences[i];
        if (is_terminal(original.back()) && !is_terminal(trim(s).back())) {
          return "sentence " + std::to_string(i) + " lost its closing punctuation";
        }
      }
      return {};
    };
    auto result =
        gateway_.chat_structured(prompts_.request("resolve_pronouns", context, std::move(schema)), check);
    for (const auto& s : result.document["sentences"]) rewritten.push_back(trim(s.get<std::string>()));
  }
  doc.normalized_plot = join_sentences(rewritten);
  doc.episode_summary.clear();
  return doc;
}

std::vector<std::string> Preprocessor::extract_entities(const EpisodeDoc& doc) {
  require(!doc.normalized_plot.empty(),
          "extract_entities: pronoun-resolved text of " + doc.key.code() + " is missing");
  Json schema = {{"type", "object"},
                 {"required", {"mentions"}},
                 {"additionalProperties", false},
                 {"properties",
                  {{"mentions", {{"type", "array"}, {"items", {{"type", "string"}, {"minLength", 1}}}}}}}};
  Json context = {{"series", doc.key.series}, {"episode", doc.key.code()}, {"text", doc.normalized_plot}};
  auto result = gateway_.chat_structured(prompts_.request("extract_entities", context, std::move(schema)));
  std::vector<std::string> out;
  for (const auto& m : result.document["mentions"]) {
    auto name = trim(m.get<std::string>());
    if (!name.empty() && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

EpisodeDoc Preprocessor::summarize_episode(EpisodeDoc doc) {
  require(!doc.normalized_plot.empty(),
          "summarize_episode: normalized plot of " + doc.key.code() + " is empty");
  Json context = {{"series", doc.key.series}, {"episode", doc.key.code()}, {"episode_plot", doc.normalized_plot}};
  const auto limit = doc.normalized_plot.size();
  auto check = [limit](const Json& reply) -> std::string {
    if (reply["summary"].get_ref<const std::string&>().size() >= limit) {
      return "summary must be shorter than the plot (" + std::to_string(limit) + " characters)";
    }
    return {};
  };
  auto result =
      gateway_.chat_structured(prompts_.request("summarize_episode", context, text_schema("summary")), check);
  doc.episode_summary = result.document["summary"].get<std::string>();
  return doc;
}

std::string Preprocessor::build_season_summary(const std::vector<EpisodeDoc>& docs) {
  require(!docs.empty(), "build_season_summary needs at least one episode");
  std::string joined;
  Json episodes = Json::array();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& d = docs[i];
    require(!d.episode_summary.empty(), "episode " + d.key.code() + " has no summary");
    require(i == 0 || docs[i - 1].key < d.key, "episodes must be in episode order");
    if (!joined.empty()) joined += "\n\n";
    joined += d.episode_summary;
    episodes.push_back({{"episode", d.key.code()}, {"summary", d.episode_summary}});
  }
  Json context = {{"series", docs.front().key.series},
                  {"season", docs.front().key.season},
                  {"episode_summaries", joined},
                  {"episodes", episodes}};
  auto result = gateway_.chat_structured(prompts_.request("summarize_season", context, text_schema("summary")));
  return result.document["summary"].get<std::string>();
}

EpisodeDoc preprocess_episode(const EpisodeKey& key, Store& store, Preprocessor& pre,
                              LlmGateway& gateway, PromptLibrary& prompts, IdGenerator& ids,
                              std::size_t* characters_changed) {
  auto stored = store.episode(key);
  if (!stored) fail(ErrorCode::NotFound, "episode " + key.series + " " + key.code() + " not ingested");

  EpisodeDoc doc = pre.simplify_plot(*stored);
  doc = pre.resolve_pronouns(std::move(doc));
  auto mentions = pre.extract_entities(doc);

  auto registry = store.characters(key.series);
  std::vector<Character> changed;
  if (!mentions.empty()) {
    changed = registry::normalize_mentions(mentions, registry, key.series, gateway, prompts, ids);
    for (const auto& c : changed) {
      auto it = std::find_if(registry.begin(), registry.end(),
                             [&](const Character& r) { return r.character_id == c.character_id; });
      if (it == registry.end()) {
        registry.push_back(c);
      } else {
        *it = c;
      }
    }
  }
  doc.normalized_plot = registry::replace_with_preferred(doc.normalized_plot, registry);
  doc = pre.summarize_episode(std::move(doc));

  store.atomically([&] {
    for (const auto& c : changed) {
      if (store.character_exists(c.character_id)) {
        store.update_character(c);
      } else {
        store.insert_character(c);
      }
    }
    store.upsert_episode(doc);
  });
  if (characters_changed) *characters_changed += changed.size();
  return doc;
}

PreprocessReport preprocess_season(const std::string& series, int season, Store& store,
                                   Preprocessor& pre, LlmGateway& gateway, PromptLibrary& prompts,
                                   IdGenerator& ids) {
  auto docs = store.episodes(series, season);
  require(!docs.empty(), "no episodes ingested for " + series + " season " + std::to_string(season));
  PreprocessReport report;
  for (auto& d : docs) {
    if (!d.episode_summary.empty()) {
      report.skipped.push_back(d.key.code());
      continue;
    }
    d = preprocess_episode(d.key, store, pre, gateway, prompts, ids, &report.characters_changed);
    report.episodes.push_back(d.key.code());
  }
  if (!report.episodes.empty() || !store.season_summary(series, season)) {
    store.set_season_summary(series, season, pre.build_season_summary(docs));
    report.season_summary_built = true;
  }
  return report;
}

}  // namespace arcweaver::preprocess
