#pragma once
// Domain types for narrative arcs, their per-episode progressions, characters
// and episode documents, plus the canonical JSON encoding shared by the API,
// the export format and the run reports.

#include <compare>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace arcweaver {

using Json = nlohmann::json;

enum class ArcType { Anthology, Soap, GenreSpecific };

std::string_view to_string(ArcType type);
// Throws Error(MalformedInput) for anything but the three canonical names.
ArcType parse_arc_type(std::string_view name);

struct EpisodeKey {
  std::string series;
  int season = 0;
  int episode = 0;

  auto operator<=>(const EpisodeKey&) const = default;
  bool operator==(const EpisodeKey&) const = default;

  // "S01E02"
  std::string code() const;
};

struct Progression {
  std::string progression_id;
  std::string arc_id;
  std::string content;
  std::string series;
  int season = 0;
  int episode = 0;
  std::set<std::string> interfering_characters;

  EpisodeKey key() const { return {series, season, episode}; }
  bool operator==(const Progression&) const = default;
};

struct NarrativeArc {
  std::string arc_id;
  std::string title;
  std::string description;
  ArcType arc_type = ArcType::Soap;
  std::set<std::string> main_characters;
  std::string series;
  std::vector<Progression> progressions;

  bool operator==(const NarrativeArc&) const = default;
};

struct Character {
  std::string character_id;
  std::string preferred_name;
  std::set<std::string> alternative_names;
  std::string series;

  bool operator==(const Character&) const = default;
};

struct EpisodeDoc {
  EpisodeKey key;
  std::string raw_plot;
  std::string simplified_plot;
  std::string normalized_plot;
  std::string episode_summary;

  bool operator==(const EpisodeDoc&) const = default;
};

struct Violation {
  std::string code;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
  std::vector<std::string> codes() const;
};

// Checks every NarrativeArc invariant against the set of known character ids.
ValidationReport validate_arc(const NarrativeArc& arc,
                              const std::unordered_set<std::string>& character_ids);
ValidationReport validate_arc(const NarrativeArc& arc, std::span<const Character> registry);

// Stable sort of progressions by (season, episode).
NarrativeArc order_progressions(NarrativeArc arc);

// Character invariants within one series. Returns violation codes.
ValidationReport validate_registry(std::span<const Character> registry);

std::string lowercase(std::string_view text);

void to_json(Json& j, const ArcType& t);
void from_json(const Json& j, ArcType& t);
void to_json(Json& j, const EpisodeKey& k);
void from_json(const Json& j, EpisodeKey& k);
void to_json(Json& j, const Progression& p);
void from_json(const Json& j, Progression& p);
void to_json(Json& j, const NarrativeArc& a);
void from_json(const Json& j, NarrativeArc& a);
void to_json(Json& j, const Character& c);
void from_json(const Json& j, Character& c);
void to_json(Json& j, const EpisodeDoc& d);
void from_json(const Json& j, EpisodeDoc& d);
void to_json(Json& j, const ValidationReport& r);

}  // namespace arcweaver
