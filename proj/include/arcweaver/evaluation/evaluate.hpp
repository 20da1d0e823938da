#pragma once
// Scores an extracted export against gold annotations.
//
// Gold file:
//   {"series": "...",
//    "arcs": [{"title", "description", "arc_type", "main_characters": [names],
//              "episodes": [{"season": 1, "episode": 2}, ...]}],
//    "characters": [{"name", "alternative_names": [...]}]}

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"

namespace arcweaver::evaluation {

struct GoldArc {
  std::string title;
  std::string description;
  ArcType arc_type = ArcType::Soap;
  std::vector<std::string> main_characters;
  std::vector<std::pair<int, int>> episodes;
};

struct GoldCharacter {
  std::string name;
  std::vector<std::string> alternative_names;
};

struct GoldAnnotations {
  std::string series;
  std::vector<GoldArc> arcs;
  std::vector<GoldCharacter> characters;

  // Throws MalformedInput naming the offending field.
  static GoldAnnotations from_json(const Json& doc);
};

struct Ratio {
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  // Empty when the denominator is zero.
  std::optional<double> value() const;
  std::string format() const;  // "25/28 = 0.893"
};

struct TypeScore {
  ArcType arc_type = ArcType::Soap;
  Ratio precision;  // matched / extracted
  Ratio recall;     // matched / gold
};

struct ArcMatch {
  std::string extracted_title;
  std::string gold_title;
  ArcType arc_type = ArcType::Soap;
  double score = 0.0;
};

struct EvaluationReport {
  std::array<TypeScore, 3> by_type;  // Anthology, Soap, GenreSpecific
  Ratio overall_precision;
  Ratio overall_recall;
  Ratio character_precision;  // matched / extracted characters
  Ratio character_recall;     // matched / gold characters
  std::size_t duplicate_characters = 0;
  std::vector<ArcMatch> matches;

  const TypeScore& score(ArcType t) const { return by_type[static_cast<std::size_t>(t)]; }
  Json to_json() const;
  std::string to_text() const;
};

// Greedy one-to-one matching of extracted to gold arcs of the same type
// whose title+description cosine reaches `match_threshold`, best score
// first. Characters match when any of their names agree case-insensitively;
// an extracted character whose only possible gold partners were already
// taken counts as a duplicate.
EvaluationReport evaluate(const Json& extracted_export, const GoldAnnotations& gold, LlmGateway& gateway,
                          double match_threshold = 0.80);

}  // namespace arcweaver::evaluation
