#include "arcweaver/registry/registry.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "arcweaver/core/error.hpp"

namespace arcweaver::registry {
namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

Json normalize_schema() {
  return Json::parse(R"({
    "type": "object",
    "required": ["characters"],
    "additionalProperties": false,
    "properties": {
      "characters": {
        "type": "array",
        "items": {
          "type": "object",
          "required": ["mentions", "preferred_name", "existing_id"],
          "additionalProperties": false,
          "properties": {
            "mentions": {"type": "array", "minItems": 1, "items": {"type": "string", "minLength": 1}},
            "preferred_name": {"type": "string"},
            "existing_id": {"type": "string"}
          }
        }
      }
    }
  })");
}

}  // namespace

std::set<std::string> word_tokens(std::string_view text) {
  std::set<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.insert(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.insert(std::move(current));
  return out;
}

std::set<std::string> name_tokens(const Character& c) {
  auto tokens = word_tokens(c.preferred_name);
  for (const auto& alt : c.alternative_names) tokens.merge(word_tokens(alt));
  return tokens;
}

double jaccard_similarity(const Character& a, const Character& b) {
  require(a.character_id != b.character_id || a.character_id.empty(),
          "jaccard_similarity needs two different characters");
  auto ta = name_tokens(a);
  auto tb = name_tokens(b);
  std::size_t common = 0;
  for (const auto& t : ta) common += tb.contains(t) ? 1 : 0;
  std::size_t total = ta.size() + tb.size() - common;
  if (total == 0) return 0.0;
  return static_cast<double>(common) / static_cast<double>(total);
}

std::vector<DuplicateSuggestion> suggest_duplicates(std::span<const Character> registry,
                                                    double threshold) {
  require(threshold > 0.0 && threshold <= 1.0, "duplicate threshold must lie in (0, 1]");
  std::vector<DuplicateSuggestion> out;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    for (std::size_t j = i + 1; j < registry.size(); ++j) {
      double score = jaccard_similarity(registry[i], registry[j]);
      if (score < threshold) continue;
      auto [first, second] = std::minmax(registry[i].character_id, registry[j].character_id);
      out.push_back({first, second, score});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.score != y.score) return x.score > y.score;
    return std::tie(x.first_id, x.second_id) < std::tie(y.first_id, y.second_id);
  });
  return out;
}

std::string replace_with_preferred(const std::string& text, std::span<const Character> registry) {
  struct Name {
    std::string text;
    const Character* owner;
    bool preferred;
  };
  std::map<std::string, std::vector<const Character*>> alt_owners;
  std::set<std::string> preferred;
  for (const auto& c : registry) {
    preferred.insert(c.preferred_name);
    for (const auto& alt : c.alternative_names) alt_owners[alt].push_back(&c);
  }
  std::vector<Name> names;
  for (const auto& c : registry) names.push_back({c.preferred_name, &c, true});
  for (const auto& [alt, owners] : alt_owners) {
    if (owners.size() == 1 && !preferred.contains(alt) && !alt.empty()) {
      names.push_back({alt, owners.front(), false});
    }
  }
  std::stable_sort(names.begin(), names.end(),
                   [](const Name& a, const Name& b) { return a.text.size() > b.text.size(); });

  auto pass = [&](const std::string& in) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
      bool at_boundary = i == 0 || !is_word_byte(static_cast<unsigned char>(in[i - 1]));
      const Name* hit = nullptr;
      if (at_boundary) {
        for (const auto& n : names) {
          std::size_t end = i + n.text.size();
          if (end > in.size() || in.compare(i, n.text.size(), n.text) != 0) continue;
          if (end < in.size() && is_word_byte(static_cast<unsigned char>(in[end]))) continue;
          hit = &n;
          break;
        }
      }
      if (hit == nullptr) {
        out += in[i++];
        continue;
      }
      out += hit->preferred ? hit->text : hit->owner->preferred_name;
      i += hit->text.size();
    }
    return out;
  };
  // A substitution can complete a longer alternative with the text around
  // it ("Dr. Nora" -> "Dr. Nora Hale"), so repeat until nothing changes.
  std::string out = pass(text);
  for (std::size_t round = 0; round < text.size() + 1; ++round) {
    auto next = pass(out);
    if (next == out) break;
    out = std::move(next);
  }
  return out;
}

std::string resolve_name(std::string_view name, std::span<const Character> registry) {
  std::string key = lowercase(name);
  for (const auto& c : registry) {
    if (lowercase(c.preferred_name) == key) return c.character_id;
  }
  std::string found;
  for (const auto& c : registry) {
    for (const auto& alt : c.alternative_names) {
      if (lowercase(alt) != key) continue;
      if (!found.empty() && found != c.character_id) return {};  // ambiguous
      found = c.character_id;
    }
  }
  return found;
}

std::vector<Character> normalize_mentions(const std::vector<std::string>& mentions,
                                          const std::vector<Character>& existing,
                                          const std::string& series, LlmGateway& gateway,
                                          PromptLibrary& prompts, IdGenerator& ids) {
  require(!mentions.empty(), "normalize_mentions needs at least one mention");

  std::map<std::string, const Character*> by_id;
  for (const auto& c : existing) by_id[c.character_id] = &c;

  Json registry_view = Json::array();
  for (const auto& c : existing) {
    registry_view.push_back({{"id", c.character_id},
                             {"preferred_name", c.preferred_name},
                             {"alternative_names", c.alternative_names}});
  }
  Json context = {{"series", series}, {"mentions", mentions}, {"characters", registry_view}};

  auto check = [&](const Json& doc) -> std::string {
    std::map<std::string, int> seen;
    std::set<std::string> new_names;
    for (const auto& group : doc["characters"]) {
      for (const auto& m : group["mentions"]) {
        if (std::find(mentions.begin(), mentions.end(), m.get<std::string>()) == mentions.end()) {
          return "mention '" + m.get<std::string>() + "' was not in the input list";
        }
        ++seen[m.get<std::string>()];
      }
      const auto id = group["existing_id"].get<std::string>();
      if (!id.empty()) {
        if (!by_id.contains(id)) return "unknown existing_id '" + id + "'";
        continue;
      }
      const auto name = group["preferred_name"].get<std::string>();
      if (name.empty()) return "a new character needs a preferred_name";
      std::string key = lowercase(name);
      for (const auto& c : existing) {
        if (lowercase(c.preferred_name) == key) {
          return "preferred_name '" + name + "' already belongs to character " + c.character_id +
                 "; use existing_id instead";
        }
      }
      if (!new_names.insert(key).second) return "preferred_name '" + name + "' used twice";
    }
    for (const auto& m : mentions) {
      if (seen[m] != 1) return "mention '" + m + "' must appear in exactly one group";
    }
    return {};
  };

  auto result = gateway.chat_structured(prompts.request("normalize_mentions", context, normalize_schema()),
                                        check);

  std::map<std::string, Character> changed;
  for (const auto& group : result.document["characters"]) {
    const auto id = group["existing_id"].get<std::string>();
    Character c;
    if (!id.empty()) {
      c = changed.contains(id) ? changed[id] : *by_id[id];
    } else {
      c.preferred_name = group["preferred_name"].get<std::string>();
      c.series = series;
      c.character_id = ids.next_unique("character|" + series + "|" + lowercase(c.preferred_name),
                                       [&](const std::string& candidate) {
                                         return by_id.contains(candidate) || changed.contains(candidate);
                                       });
    }
    for (const auto& m : group["mentions"]) {
      auto name = m.get<std::string>();
      if (name != c.preferred_name) c.alternative_names.insert(name);
    }
    if (id.empty() || c != *by_id[id]) changed[c.character_id] = c;
  }

  std::vector<Character> out;
  for (auto& [id, c] : changed) out.push_back(std::move(c));
  return out;
}

Character merge_characters(const std::string& keep_id, const std::string& remove_id, Store& store) {
  if (keep_id == remove_id) fail(ErrorCode::SelfMerge, "cannot merge character " + keep_id + " into itself");
  return store.atomically([&] {
    auto keep = store.character(keep_id);
    auto remove = store.character(remove_id);
    if (!keep) fail(ErrorCode::NotFound, "character " + keep_id);
    if (!remove) fail(ErrorCode::NotFound, "character " + remove_id);
    if (keep->series != remove->series) fail(ErrorCode::Conflict, "characters belong to different series");

    keep->alternative_names.insert(remove->preferred_name);
    keep->alternative_names.insert(remove->alternative_names.begin(), remove->alternative_names.end());
    keep->alternative_names.erase(keep->preferred_name);

    store.replace_character_references(remove_id, keep_id);
    store.delete_character(remove_id);
    store.update_character(*keep);
    return *keep;
  });
}

}  // namespace arcweaver::registry
