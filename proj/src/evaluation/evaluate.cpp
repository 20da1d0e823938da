#include "arcweaver/evaluation/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "arcweaver/core/error.hpp"
#include "arcweaver/semantic/semantic.hpp"

namespace arcweaver::evaluation {
namespace {

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  fail(ErrorCode::MalformedInput, "gold annotations: " + where + ": " + what);
}

std::string string_field(const Json& obj, const char* key, const std::string& where, bool required = true) {
  if (!obj.contains(key)) {
    if (required) malformed(where, std::string("missing \"") + key + "\"");
    return {};
  }
  if (!obj[key].is_string()) malformed(where + "." + key, "must be a string");
  return obj[key].get<std::string>();
}

std::vector<std::string> string_list(const Json& obj, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  if (!obj[key].is_array()) malformed(where + "." + key, "must be an array of strings");
  for (const auto& v : obj[key]) {
    if (!v.is_string()) malformed(where + "." + key, "must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

struct Item {
  std::string title;
  std::string text;  // title + "\n" + description
  ArcType type;
};

struct NameSet {
  std::string preferred;
  std::set<std::string> all;  // lowercased preferred + alternatives
};

NameSet names(const std::string& preferred, const std::vector<std::string>& alternatives) {
  NameSet n{lowercase(preferred), {lowercase(preferred)}};
  for (const auto& a : alternatives) n.all.insert(lowercase(a));
  return n;
}

bool overlap(const NameSet& a, const NameSet& b) {
  return std::any_of(a.all.begin(), a.all.end(), [&](const std::string& x) { return b.all.contains(x); });
}

}  // namespace

GoldAnnotations GoldAnnotations::from_json(const Json& doc) {
  if (!doc.is_object()) malformed("document", "must be an object");
  GoldAnnotations g;
  g.series = string_field(doc, "series", "document", false);
  if (!doc.contains("arcs") || !doc["arcs"].is_array()) malformed("document", "\"arcs\" must be an array");
  for (std::size_t i = 0; i < doc["arcs"].size(); ++i) {
    const auto& a = doc["arcs"][i];
    const auto where = "arcs[" + std::to_string(i) + "]";
    if (!a.is_object()) malformed(where, "must be an object");
    GoldArc arc;
    arc.title = string_field(a, "title", where);
    arc.description = string_field(a, "description", where);
    try {
      arc.arc_type = parse_arc_type(string_field(a, "arc_type", where));
    } catch (const Error& e) {
      malformed(where + ".arc_type", e.what());
    }
    arc.main_characters = string_list(a, "main_characters", where);
    if (a.contains("episodes")) {
      if (!a["episodes"].is_array()) malformed(where + ".episodes", "must be an array");
      for (const auto& e : a["episodes"]) {
        if (!e.is_object() || !e.contains("season") || !e.contains("episode") ||
            !e["season"].is_number_integer() || !e["episode"].is_number_integer() || e["season"].get<int>() < 1 ||
            e["episode"].get<int>() < 1) {
          malformed(where + ".episodes", "entries need positive integer season and episode");
        }
        arc.episodes.emplace_back(e["season"].get<int>(), e["episode"].get<int>());
      }
    }
    g.arcs.push_back(std::move(arc));
  }
  if (doc.contains("characters")) {
    if (!doc["characters"].is_array()) malformed("document", "\"characters\" must be an array");
    for (std::size_t i = 0; i < doc["characters"].size(); ++i) {
      const auto& c = doc["characters"][i];
      const auto where = "characters[" + std::to_string(i) + "]";
      if (!c.is_object()) malformed(where, "must be an object");
      GoldCharacter gc;
      gc.name = string_field(c, "name", where);
      if (gc.name.empty()) malformed(where + ".name", "must not be empty");
      gc.alternative_names = string_list(c, "alternative_names", where);
      g.characters.push_back(std::move(gc));
    }
  }
  return g;
}

std::optional<double> Ratio::value() const {
  if (denominator == 0) return std::nullopt;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::string Ratio::format() const {
  char buf[96];
  if (auto v = value()) {
    std::snprintf(buf, sizeof buf, "%zu/%zu = %.3f", numerator, denominator, *v);
  } else {
    std::snprintf(buf, sizeof buf, "%zu/%zu = n/a", numerator, denominator);
  }
  return buf;
}

EvaluationReport evaluate(const Json& extracted_export, const GoldAnnotations& gold, LlmGateway& gateway,
                          double match_threshold) {
  require(match_threshold > 0.0 && match_threshold <= 1.0, "match threshold must lie in (0, 1]");
  if (!extracted_export.is_object() || !extracted_export.contains("arcs") ||
      !extracted_export["arcs"].is_array()) {
    fail(ErrorCode::MalformedInput, "extracted export has no \"arcs\" array");
  }
  auto in_scope = [&](const Json& entity) {
    return gold.series.empty() || entity.value("series", std::string()) == gold.series;
  };

  std::vector<Item> extracted;
  for (const auto& a : extracted_export["arcs"]) {
    if (!in_scope(a)) continue;
    NarrativeArc arc = a.get<NarrativeArc>();
    extracted.push_back({arc.title, arc.title + "\n" + arc.description, arc.arc_type});
  }
  std::vector<Item> reference;
  for (const auto& a : gold.arcs) reference.push_back({a.title, a.title + "\n" + a.description, a.arc_type});

  std::map<std::string, EmbeddingVector> vectors;
  {
    std::vector<std::string> texts;
    for (const auto* list : {&extracted, &reference}) {
      for (const auto& item : *list) {
        if (!vectors.contains(item.text)) {
          vectors[item.text] = {};
          texts.push_back(item.text);
        }
      }
    }
    if (!texts.empty()) {
      auto embedded = gateway.embed(texts);
      for (std::size_t i = 0; i < texts.size(); ++i) vectors[texts[i]] = std::move(embedded[i]);
    }
  }

  struct Candidate {
    double score;
    std::size_t e, g;
  };
  std::vector<Candidate> candidates;
  for (std::size_t e = 0; e < extracted.size(); ++e) {
    for (std::size_t g = 0; g < reference.size(); ++g) {
      if (extracted[e].type != reference[g].type) continue;
      double score = semantic::cosine_similarity(vectors[extracted[e].text], vectors[reference[g].text]);
      if (score >= match_threshold) candidates.push_back({score, e, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(extracted[a.e].text, reference[a.g].text, a.e, a.g) <
           std::tie(extracted[b.e].text, reference[b.g].text, b.e, b.g);
  });

  EvaluationReport report;
  std::vector<bool> e_used(extracted.size()), g_used(reference.size());
  std::array<std::size_t, 3> matched{}, n_extracted{}, n_gold{};
  for (const auto& item : extracted) ++n_extracted[static_cast<std::size_t>(item.type)];
  for (const auto& item : reference) ++n_gold[static_cast<std::size_t>(item.type)];
  for (const auto& c : candidates) {
    if (e_used[c.e] || g_used[c.g]) continue;
    e_used[c.e] = g_used[c.g] = true;
    ++matched[static_cast<std::size_t>(extracted[c.e].type)];
    report.matches.push_back({extracted[c.e].title, reference[c.g].title, extracted[c.e].type, c.score});
  }
  std::size_t total_matched = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    report.by_type[t] = {static_cast<ArcType>(t), {matched[t], n_extracted[t]}, {matched[t], n_gold[t]}};
    total_matched += matched[t];
  }
  report.overall_precision = {total_matched, extracted.size()};
  report.overall_recall = {total_matched, reference.size()};

  std::vector<NameSet> ext_chars;
  if (extracted_export.contains("characters")) {
    for (const auto& c : extracted_export["characters"]) {
      if (!in_scope(c)) continue;
      Character ch = c.get<Character>();
      ext_chars.push_back(names(ch.preferred_name, {ch.alternative_names.begin(), ch.alternative_names.end()}));
    }
  }
  std::sort(ext_chars.begin(), ext_chars.end(), [](const NameSet& a, const NameSet& b) {
    return std::tie(a.preferred, a.all) < std::tie(b.preferred, b.all);
  });
  std::vector<NameSet> gold_chars;
  for (const auto& c : gold.characters) gold_chars.push_back(names(c.name, c.alternative_names));

  std::vector<bool> ext_matched(ext_chars.size()), gold_taken(gold_chars.size());
  // Exact preferred-name agreement claims gold entries before looser overlaps.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < ext_chars.size(); ++i) {
      if (ext_matched[i]) continue;
      for (std::size_t j = 0; j < gold_chars.size(); ++j) {
        if (gold_taken[j]) continue;
        bool hit = pass == 0 ? ext_chars[i].preferred == gold_chars[j].preferred : overlap(ext_chars[i], gold_chars[j]);
        if (!hit) continue;
        ext_matched[i] = gold_taken[j] = true;
        break;
      }
    }
  }
  std::size_t char_matched = 0;
  for (std::size_t i = 0; i < ext_chars.size(); ++i) {
    if (ext_matched[i]) {
      ++char_matched;
      continue;
    }
    for (const auto& g : gold_chars) {
      if (overlap(ext_chars[i], g)) {
        ++report.duplicate_characters;
        break;
      }
    }
  }
  report.character_precision = {char_matched, ext_chars.size()};
  report.character_recall = {char_matched, gold_chars.size()};
  return report;
}

namespace {
Json ratio_json(const Ratio& r) {
  Json j = {{"numerator", r.numerator}, {"denominator", r.denominator}};
  if (auto v = r.value()) {
    j["value"] = *v;
  } else {
    j["value"] = nullptr;
  }
  return j;
}
}  // namespace

Json EvaluationReport::to_json() const {
  Json types = Json::object();
  for (const auto& t : by_type) {
    types[std::string(to_string(t.arc_type))] = {{"precision", ratio_json(t.precision)},
                                                 {"recall", ratio_json(t.recall)}};
  }
  Json m = Json::array();
  for (const auto& x : matches) {
    m.push_back({{"extracted", x.extracted_title},
                 {"gold", x.gold_title},
                 {"arc_type", to_string(x.arc_type)},
                 {"score", x.score}});
  }
  return {{"arc_types", types},
          {"overall", {{"precision", ratio_json(overall_precision)}, {"recall", ratio_json(overall_recall)}}},
          {"characters",
           {{"precision", ratio_json(character_precision)},
            {"recall", ratio_json(character_recall)},
            {"duplicates", duplicate_characters}}},
          {"matches", m}};
}

std::string EvaluationReport::to_text() const {
  std::string out;
  for (const auto& t : by_type) {
    const std::string name(to_string(t.arc_type));
    out += name + " precision: " + t.precision.format() + "\n";
    out += name + " recall: " + t.recall.format() + "\n";
  }
  out += "Overall precision: " + overall_precision.format() + "\n";
  out += "Overall recall: " + overall_recall.format() + "\n";
  out += "Character precision: " + character_precision.format() + "\n";
  out += "Character recall: " + character_recall.format() + "\n";
  out += "Duplicate characters: " + std::to_string(duplicate_characters) + "\n";
  return out;
}

}  // namespace arcweaver::evaluation
