#include "arcweaver/core/model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

#include "arcweaver/core/error.hpp"

namespace arcweaver {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::OutOfOrderEpisode: return "OutOfOrderEpisode";
    case ErrorCode::AlreadyProcessed: return "AlreadyProcessed";
    case ErrorCode::SelfMerge: return "SelfMerge";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::SchemaRepairExhausted: return "SchemaRepairExhausted";
    case ErrorCode::UnmatchedMockRequest: return "UnmatchedMockRequest";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Injected: return "Injected";
  }
  return "Unknown";
}

std::string_view to_string(ArcType type) {
  switch (type) {
    case ArcType::Anthology: return "Anthology";
    case ArcType::Soap: return "Soap";
    case ArcType::GenreSpecific: return "GenreSpecific";
  }
  return "Soap";
}

ArcType parse_arc_type(std::string_view name) {
  if (name == "Anthology") return ArcType::Anthology;
  if (name == "Soap") return ArcType::Soap;
  if (name == "GenreSpecific") return ArcType::GenreSpecific;
  fail(ErrorCode::MalformedInput, "unknown arc type '" + std::string(name) + "'");
}

std::string EpisodeKey::code() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%02dE%02d", season, episode);
  return buf;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

std::vector<std::string> ValidationReport::codes() const {
  std::vector<std::string> out;
  out.reserve(violations.size());
  for (const auto& v : violations) out.push_back(v.code);
  return out;
}

ValidationReport validate_arc(const NarrativeArc& arc,
                              const std::unordered_set<std::string>& character_ids) {
  ValidationReport report;
  auto add = [&](std::string code, std::string detail) {
    report.violations.push_back({std::move(code), std::move(detail)});
  };

  if (arc.arc_id.empty()) add("missing-arc-id", "arc has no id");
  auto blank = [](const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  };
  if (blank(arc.title)) add("empty-title", "title must be non-empty");
  if (blank(arc.description)) add("empty-description", "description must be non-empty");
  if (arc.series.empty()) add("empty-series", "series must be non-empty");

  for (const auto& id : arc.main_characters) {
    if (!character_ids.contains(id)) add("unknown-main-character", id);
  }

  std::map<std::pair<int, int>, int> per_episode;
  const Progression* previous = nullptr;
  bool unordered = false;
  for (const auto& p : arc.progressions) {
    if (p.season < 1 || p.episode < 1) {
      add("invalid-episode-key", p.progression_id);
    }
    if (p.arc_id != arc.arc_id) add("progression-arc-mismatch", p.progression_id);
    if (p.series != arc.series) add("progression-series-mismatch", p.progression_id);
    if (p.content.empty()) add("empty-progression-content", p.progression_id);
    if (p.progression_id.empty()) add("missing-progression-id", "progression has no id");
    for (const auto& id : p.interfering_characters) {
      if (!character_ids.contains(id)) add("unknown-interfering-character", id);
    }
    if (++per_episode[{p.season, p.episode}] == 2) {
      add("duplicate-episode-progression", p.key().code());
    }
    if (previous != nullptr &&
        std::pair(previous->season, previous->episode) > std::pair(p.season, p.episode)) {
      unordered = true;
    }
    previous = &p;
  }
  if (unordered) add("unordered-progressions", "progressions not sorted by episode");
  if (arc.arc_type == ArcType::Anthology && per_episode.size() > 1) {
    add("anthology-multi-episode", "anthology arc spans " +
                                       std::to_string(per_episode.size()) + " episodes");
  }
  return report;
}

ValidationReport validate_arc(const NarrativeArc& arc, std::span<const Character> registry) {
  std::unordered_set<std::string> ids;
  for (const auto& c : registry) ids.insert(c.character_id);
  return validate_arc(arc, ids);
}

NarrativeArc order_progressions(NarrativeArc arc) {
  std::stable_sort(arc.progressions.begin(), arc.progressions.end(),
                   [](const Progression& a, const Progression& b) {
                     return std::pair(a.season, a.episode) < std::pair(b.season, b.episode);
                   });
  return arc;
}

ValidationReport validate_registry(std::span<const Character> registry) {
  ValidationReport report;
  std::map<std::pair<std::string, std::string>, std::string> names;
  for (const auto& c : registry) {
    if (c.preferred_name.empty()) {
      report.violations.push_back({"empty-preferred-name", c.character_id});
    }
    if (c.alternative_names.contains(c.preferred_name)) {
      report.violations.push_back({"preferred-in-alternatives", c.character_id});
    }
    auto [it, inserted] =
        names.emplace(std::pair(c.series, lowercase(c.preferred_name)), c.character_id);
    if (!inserted) {
      report.violations.push_back({"duplicate-preferred-name", c.preferred_name});
    }
  }
  return report;
}

// --- JSON ------------------------------------------------------------------

void to_json(Json& j, const ArcType& t) { j = std::string(to_string(t)); }
void from_json(const Json& j, ArcType& t) { t = parse_arc_type(j.get<std::string>()); }

void to_json(Json& j, const EpisodeKey& k) {
  j = Json{{"series", k.series}, {"season", k.season}, {"episode", k.episode}};
}
void from_json(const Json& j, EpisodeKey& k) {
  j.at("series").get_to(k.series);
  j.at("season").get_to(k.season);
  j.at("episode").get_to(k.episode);
}

void to_json(Json& j, const Progression& p) {
  j = Json{{"progression_id", p.progression_id},
           {"arc_id", p.arc_id},
           {"content", p.content},
           {"series", p.series},
           {"season", p.season},
           {"episode", p.episode},
           {"interfering_characters", p.interfering_characters}};
}
void from_json(const Json& j, Progression& p) {
  j.at("progression_id").get_to(p.progression_id);
  j.at("arc_id").get_to(p.arc_id);
  j.at("content").get_to(p.content);
  j.at("series").get_to(p.series);
  j.at("season").get_to(p.season);
  j.at("episode").get_to(p.episode);
  p.interfering_characters = j.value("interfering_characters", std::set<std::string>{});
}

void to_json(Json& j, const NarrativeArc& a) {
  j = Json{{"arc_id", a.arc_id},
           {"title", a.title},
           {"description", a.description},
           {"arc_type", a.arc_type},
           {"main_characters", a.main_characters},
           {"series", a.series},
           {"progressions", a.progressions}};
}
void from_json(const Json& j, NarrativeArc& a) {
  j.at("arc_id").get_to(a.arc_id);
  j.at("title").get_to(a.title);
  j.at("description").get_to(a.description);
  j.at("arc_type").get_to(a.arc_type);
  a.main_characters = j.value("main_characters", std::set<std::string>{});
  j.at("series").get_to(a.series);
  a.progressions = j.value("progressions", std::vector<Progression>{});
}

void to_json(Json& j, const Character& c) {
  j = Json{{"character_id", c.character_id},
           {"preferred_name", c.preferred_name},
           {"alternative_names", c.alternative_names},
           {"series", c.series}};
}
void from_json(const Json& j, Character& c) {
  j.at("character_id").get_to(c.character_id);
  j.at("preferred_name").get_to(c.preferred_name);
  c.alternative_names = j.value("alternative_names", std::set<std::string>{});
  j.at("series").get_to(c.series);
}

void to_json(Json& j, const EpisodeDoc& d) {
  j = Json{{"key", d.key},
           {"raw_plot", d.raw_plot},
           {"simplified_plot", d.simplified_plot},
           {"normalized_plot", d.normalized_plot},
           {"episode_summary", d.episode_summary}};
}
void from_json(const Json& j, EpisodeDoc& d) {
  j.at("key").get_to(d.key);
  j.at("raw_plot").get_to(d.raw_plot);
  d.simplified_plot = j.value("simplified_plot", "");
  d.normalized_plot = j.value("normalized_plot", "");
  d.episode_summary = j.value("episode_summary", "");
  if (!d.normalized_plot.empty() && d.simplified_plot.empty()) {
    fail(ErrorCode::MalformedInput,
         "episode " + d.key.code() + " has a normalized plot but no simplified plot");
  }
}

void to_json(Json& j, const ValidationReport& r) {
  j = Json::array();
  for (const auto& v : r.violations) j.push_back({{"code", v.code}, {"detail", v.detail}});
}

}  // namespace arcweaver
