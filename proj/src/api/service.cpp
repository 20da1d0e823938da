#include "arcweaver/api/service.hpp"

#include <algorithm>

#include "httplib.h"

#include "arcweaver/core/error.hpp"
#include "arcweaver/gateway/schema.hpp"
#include "arcweaver/pipeline/pipeline.hpp"
#include "arcweaver/registry/registry.hpp"

namespace arcweaver::api {
namespace {

class SeasonLocked : public Error {
 public:
  explicit SeasonLocked(const std::string& series)
      : Error(ErrorCode::Conflict, "a pipeline run holds a season lock on " + series + "; retry later") {}
};

struct Invalid : Error {
  Invalid(std::string message, ValidationReport r)
      : Error(ErrorCode::ConstraintViolation, std::move(message)), report(std::move(r)) {}
  ValidationReport report;
};

const char* kSchema = R"({
  "$defs": {
    "Error": {
      "type": "object", "required": ["error", "message"],
      "properties": {"error": {"type": "string"}, "message": {"type": "string"},
                     "violations": {"type": "array", "items": {"type": "object",
                       "required": ["code", "detail"],
                       "properties": {"code": {"type": "string"}, "detail": {"type": "string"}}}}}
    },
    "Health": {
      "type": "object", "required": ["status", "schema_version", "provider"],
      "properties": {"status": {"const": "ok"}, "schema_version": {"type": "integer"}, "provider": {"type": "string"}}
    },
    "Series": {
      "type": "object", "required": ["name", "genre"],
      "properties": {"name": {"type": "string"}, "genre": {"type": "string"}}
    },
    "SeriesList": {"type": "array", "items": {"$ref": "#/$defs/Series"}},
    "Progression": {
      "type": "object",
      "required": ["progression_id", "arc_id", "content", "series", "season", "episode", "interfering_characters"],
      "properties": {
        "progression_id": {"type": "string"}, "arc_id": {"type": "string"},
        "content": {"type": "string", "minLength": 1}, "series": {"type": "string"},
        "season": {"type": "integer", "minimum": 1}, "episode": {"type": "integer", "minimum": 1},
        "interfering_characters": {"type": "array", "items": {"type": "string"}}
      }
    },
    "NarrativeArc": {
      "type": "object",
      "required": ["arc_id", "title", "description", "arc_type", "main_characters", "series", "progressions"],
      "properties": {
        "arc_id": {"type": "string", "minLength": 1}, "title": {"type": "string", "minLength": 1},
        "description": {"type": "string", "minLength": 1},
        "arc_type": {"enum": ["Anthology", "Soap", "GenreSpecific"]},
        "main_characters": {"type": "array", "items": {"type": "string"}},
        "series": {"type": "string"},
        "progressions": {"type": "array", "items": {"$ref": "#/$defs/Progression"}}
      }
    },
    "ArcList": {"type": "array", "items": {"$ref": "#/$defs/NarrativeArc"}},
    "Character": {
      "type": "object", "required": ["character_id", "preferred_name", "alternative_names", "series"],
      "properties": {
        "character_id": {"type": "string"}, "preferred_name": {"type": "string", "minLength": 1},
        "alternative_names": {"type": "array", "items": {"type": "string"}}, "series": {"type": "string"}
      }
    },
    "CharacterList": {"type": "array", "items": {"$ref": "#/$defs/Character"}},
    "DuplicateList": {
      "type": "array",
      "items": {
        "type": "object", "required": ["first", "second", "score"],
        "properties": {"first": {"$ref": "#/$defs/Character"}, "second": {"$ref": "#/$defs/Character"},
                       "score": {"type": "number", "minimum": 0, "maximum": 1}}
      }
    },
    "ProgressionDraft": {
      "type": "object", "required": ["draft", "persisted"],
      "properties": {"draft": {"type": "object"}, "persisted": {"const": false}}
    },
    "Timeline": {
      "type": "object", "required": ["series", "season", "episodes", "rows"],
      "properties": {
        "series": {"type": "string"}, "season": {"type": "integer"},
        "episodes": {"type": "array", "items": {"type": "object", "required": ["season", "episode", "code"]}},
        "rows": {"type": "array", "items": {
          "type": "object", "required": ["arc_id", "title", "arc_type", "main_characters", "cells"],
          "properties": {
            "arc_id": {"type": "string"}, "title": {"type": "string"},
            "arc_type": {"enum": ["Anthology", "Soap", "GenreSpecific"]},
            "main_characters": {"type": "array", "items": {"type": "string"}},
            "cells": {"type": "array", "items": {"type": ["object", "null"]}}
          }}}
      }
    },
    "Clusters": {
      "type": "object", "required": ["threshold", "clusters"],
      "properties": {"threshold": {"type": "number"},
                     "clusters": {"type": "array", "items": {"type": "array", "minItems": 1, "items": {"type": "string"}}}}
    },
    "Projection": {
      "type": "object", "required": ["points", "explained_variance_ratio"],
      "properties": {
        "points": {"type": "array", "items": {"type": "object", "required": ["arc_id", "x", "y", "z"],
          "properties": {"arc_id": {"type": "string"}, "x": {"type": "number"}, "y": {"type": "number"}, "z": {"type": "number"}}}},
        "explained_variance_ratio": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}}
      }
    },
    "RunReport": {
      "type": "object",
      "required": ["series", "season", "episode", "created", "extended", "linked", "merges", "drops",
                   "rejected_flags", "warnings", "gateway_call_count", "embed_call_count"],
      "properties": {
        "series": {"type": "string"}, "season": {"type": "integer"}, "episode": {"type": "integer"},
        "created": {"type": "array"}, "extended": {"type": "array"}, "linked": {"type": "array"},
        "merges": {"type": "array"}, "drops": {"type": "array"}, "rejected_flags": {"type": "array"},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "gateway_call_count": {"type": "integer", "minimum": 0}, "embed_call_count": {"type": "integer", "minimum": 0}
      }
    },
    "Export": {
      "type": "object",
      "required": ["schema_version", "series", "characters", "episodes", "season_summaries", "arcs", "embeddings",
                   "link_audit", "runs", "dismissed_duplicates"],
      "properties": {"schema_version": {"type": "integer"}, "arcs": {"$ref": "#/$defs/ArcList"},
                     "characters": {"$ref": "#/$defs/CharacterList"}}
    },
    "Ack": {"type": "object", "required": ["ok"], "properties": {"ok": {"const": true}}}
  },
  "endpoints": [
    {"method": "GET", "path": "/health", "response": "Health"},
    {"method": "GET", "path": "/schema", "response": null},
    {"method": "GET", "path": "/series", "response": "SeriesList"},
    {"method": "GET", "path": "/series/{series}/arcs", "query": ["arc_type", "character"], "response": "ArcList"},
    {"method": "POST", "path": "/series/{series}/arcs", "response": "NarrativeArc"},
    {"method": "GET", "path": "/arcs/{arc_id}", "response": "NarrativeArc"},
    {"method": "PUT", "path": "/arcs/{arc_id}", "response": "NarrativeArc"},
    {"method": "DELETE", "path": "/arcs/{arc_id}", "response": "Ack"},
    {"method": "POST", "path": "/arcs/merge", "response": "NarrativeArc"},
    {"method": "POST", "path": "/arcs/{arc_id}/progressions", "response": "Progression"},
    {"method": "POST", "path": "/arcs/{arc_id}/progressions/draft", "response": "ProgressionDraft"},
    {"method": "PUT", "path": "/progressions/{progression_id}", "response": "Progression"},
    {"method": "DELETE", "path": "/progressions/{progression_id}", "response": "Ack"},
    {"method": "GET", "path": "/series/{series}/characters", "response": "CharacterList"},
    {"method": "GET", "path": "/series/{series}/characters/duplicates", "query": ["threshold"], "response": "DuplicateList"},
    {"method": "POST", "path": "/series/{series}/characters/dismiss", "response": "Ack"},
    {"method": "POST", "path": "/characters/merge", "response": "Character"},
    {"method": "PUT", "path": "/characters/{character_id}", "response": "Character"},
    {"method": "GET", "path": "/series/{series}/seasons/{season}/timeline", "query": ["arc_type", "character"], "response": "Timeline"},
    {"method": "GET", "path": "/series/{series}/clusters", "query": ["threshold"], "response": "Clusters"},
    {"method": "GET", "path": "/series/{series}/pca3d", "response": "Projection"},
    {"method": "POST", "path": "/series/{series}/seasons/{season}/episodes/{episode}/run", "response": "RunReport"},
    {"method": "GET", "path": "/series/{series}/runs/{season}/{episode}", "response": "RunReport"},
    {"method": "GET", "path": "/series/{series}/export", "response": "Export"}
  ]
})";

Json parse_body(const httplib::Request& req) {
  Json body;
  try {
    body = req.body.empty() ? Json::object() : Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::MalformedInput, std::string("request body is not JSON: ") + e.what());
  }
  if (!body.is_object()) fail(ErrorCode::MalformedInput, "request body must be a JSON object");
  return body;
}

template <class T>
T field(const Json& body, const char* key) {
  if (!body.contains(key)) fail(ErrorCode::MalformedInput, std::string("missing field \"") + key + "\"");
  try {
    return body.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::MalformedInput, std::string("field \"") + key + "\" has the wrong type");
  }
}

int to_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::MalformedInput, std::string(what) + " must be an integer");
}

double query_double(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    std::size_t used = 0;
    const auto s = req.get_param_value(key);
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::MalformedInput, std::string("query parameter ") + key + " must be a number");
}

EpisodeKey first_key(const NarrativeArc& a) {
  return a.progressions.empty() ? EpisodeKey{a.series, 0, 0} : a.progressions.front().key();
}

}  // namespace

Json published_schema() {
  static const Json schema = Json::parse(kSchema);
  return schema;
}

std::vector<std::string> validate_response(const std::string& definition, const Json& body) {
  Json root = {{"$defs", published_schema()["$defs"]}, {"$ref", "#/$defs/" + definition}};
  return validate_schema(root, body);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::AlreadyProcessed:
    case ErrorCode::OutOfOrderEpisode: return 409;
    case ErrorCode::ConstraintViolation:
    case ErrorCode::Precondition:
    case ErrorCode::MalformedInput:
    case ErrorCode::SelfMerge:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ZeroVector:
    case ErrorCode::InsufficientPoints: return 422;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::SchemaRepairExhausted:
    case ErrorCode::UnmatchedMockRequest: return 503;
    default: return 500;
  }
}

struct ApiService::Impl {
  explicit Impl(Engine& e) : engine(e), store(e.store) { routes(); }

  Engine& engine;
  Store& store;
  httplib::Server server;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  Handler wrap(std::function<Json(const httplib::Request&, httplib::Response&)> fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        res.status = 200;
        Json body = fn(req, res);
        res.set_content(body.dump(), "application/json");
      } catch (const SeasonLocked& e) {
        res.set_header("Retry-After", "5");
        reply(res, 409, {{"error", to_string(e.code())}, {"message", e.what()}});
      } catch (const Invalid& e) {
        Json v = Json::array();
        for (const auto& x : e.report.violations) v.push_back({{"code", x.code}, {"detail", x.detail}});
        reply(res, 422, {{"error", to_string(e.code())}, {"message", e.what()}, {"violations", v}});
      } catch (const Error& e) {
        reply(res, status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  void ensure_unlocked(const std::string& series) {
    if (store.series_locked(series)) throw SeasonLocked(series);
  }

  // Runs a mutation in one transaction after checking the series lock, so a
  // pipeline run cannot start between the check and the write.
  template <class F>
  decltype(auto) mutate(const std::string& series, F&& f) {
    return store.atomically([&]() -> decltype(auto) {
      ensure_unlocked(series);
      return f();
    });
  }

  NarrativeArc arc_or_404(const std::string& id) {
    auto a = store.arc(id);
    if (!a) fail(ErrorCode::NotFound, "arc " + id);
    return *a;
  }

  void validate(const NarrativeArc& arc) {
    auto report = validate_arc(arc, store.characters(arc.series));
    if (!report.ok()) {
      throw Invalid("arc " + arc.arc_id + " violates " + std::to_string(report.violations.size()) + " rule(s)",
                    report);
    }
  }

  std::set<std::string> character_ids(const Json& body, const char* key, const std::string& series) {
    std::set<std::string> out;
    if (!body.contains(key)) return out;
    auto registry = store.characters(series);
    for (const auto& v : field<std::vector<std::string>>(body, key)) {
      if (std::any_of(registry.begin(), registry.end(), [&](const Character& c) { return c.character_id == v; })) {
        out.insert(v);
        continue;
      }
      auto id = registry::resolve_name(v, registry);
      out.insert(id.empty() ? v : id);  // unknown ids surface as violations
    }
    return out;
  }

  Progression progression_from(const Json& body, const NarrativeArc& arc) {
    Progression p;
    p.arc_id = arc.arc_id;
    p.series = arc.series;
    p.season = field<int>(body, "season");
    p.episode = field<int>(body, "episode");
    p.content = field<std::string>(body, "content");
    p.interfering_characters = character_ids(body, "interfering_characters", arc.series);
    p.progression_id = engine.ids.next_unique("progression|" + arc.arc_id + "|" + p.key().code(),
                                              [&](const std::string& id) { return store.progression_exists(id); });
    return p;
  }

  Json timeline(const std::string& series, int season, const httplib::Request& req) {
    if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
    auto arcs = store.arcs_in_season(series, season);
    std::set<std::pair<int, int>> columns;
    for (const auto& e : store.episodes(series, season)) columns.insert({e.key.season, e.key.episode});
    for (const auto& a : arcs) {
      for (const auto& p : a.progressions) {
        if (p.season == season) columns.insert({p.season, p.episode});
      }
    }
    std::optional<ArcType> type_filter;
    if (req.has_param("arc_type")) {
      try {
        type_filter = parse_arc_type(req.get_param_value("arc_type"));
      } catch (const Error& e) {
        fail(ErrorCode::MalformedInput, e.what());
      }
    }
    std::string character_filter;
    if (req.has_param("character")) {
      auto registry = store.characters(series);
      const auto wanted = req.get_param_value("character");
      character_filter = wanted;
      for (const auto& c : registry) {
        if (c.character_id == wanted) character_filter = wanted;
      }
      if (auto id = registry::resolve_name(wanted, registry); !id.empty()) character_filter = id;
    }
    std::sort(arcs.begin(), arcs.end(), [](const NarrativeArc& a, const NarrativeArc& b) {
      const auto ka = first_key(a);
      const auto kb = first_key(b);
      return std::tie(ka, a.title, a.arc_id) < std::tie(kb, b.title, b.arc_id);
    });

    Json episodes = Json::array();
    for (const auto& [s, e] : columns) episodes.push_back({{"season", s}, {"episode", e}, {"code", EpisodeKey{series, s, e}.code()}});
    Json rows = Json::array();
    for (const auto& a : arcs) {
      if (type_filter && a.arc_type != *type_filter) continue;
      if (!character_filter.empty()) {
        bool involved = a.main_characters.contains(character_filter) ||
                        std::any_of(a.progressions.begin(), a.progressions.end(), [&](const Progression& p) {
                          return p.interfering_characters.contains(character_filter);
                        });
        if (!involved) continue;
      }
      Json cells = Json::array();
      for (const auto& [s, e] : columns) {
        Json cell = nullptr;
        for (const auto& p : a.progressions) {
          if (p.season == s && p.episode == e) {
            cell = {{"progression_id", p.progression_id},
                    {"content", p.content},
                    {"interfering_characters", p.interfering_characters}};
          }
        }
        cells.push_back(cell);
      }
      rows.push_back({{"arc_id", a.arc_id},
                      {"title", a.title},
                      {"arc_type", to_string(a.arc_type)},
                      {"main_characters", a.main_characters},
                      {"cells", cells}});
    }
    return {{"series", series}, {"season", season}, {"episodes", episodes}, {"rows", rows}};
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", engine.config.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Expose-Headers", "Retry-After"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/health", wrap([this](const auto&, auto&) -> Json {
      return {{"status", "ok"}, {"schema_version", store.schema_version()}, {"provider", engine.provider->kind()}};
    }));
    server.Get("/schema", wrap([](const auto&, auto&) -> Json { return published_schema(); }));
    server.Get("/series", wrap([this](const auto&, auto&) -> Json {
      Json out = Json::array();
      for (const auto& s : store.all_series()) out.push_back({{"name", s.name}, {"genre", s.genre}});
      return out;
    }));

    // arcs
    server.Get(R"(/series/([^/]+)/arcs)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      std::optional<ArcType> type;
      if (req.has_param("arc_type")) type = parse_arc_type(req.get_param_value("arc_type"));
      std::string character = req.has_param("character") ? req.get_param_value("character") : "";
      if (!character.empty()) {
        if (auto id = registry::resolve_name(character, store.characters(series)); !id.empty()) character = id;
      }
      Json out = Json::array();
      for (const auto& a : store.arcs(series)) {
        if (type && a.arc_type != *type) continue;
        if (!character.empty() && !a.main_characters.contains(character)) continue;
        out.push_back(a);
      }
      return out;
    }));
    server.Post(R"(/series/([^/]+)/arcs)", wrap([this](const auto& req, auto& res) -> Json {
      const std::string series = req.matches[1];
      const auto body = parse_body(req);
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      NarrativeArc arc;
      arc.series = series;
      arc.title = field<std::string>(body, "title");
      arc.description = field<std::string>(body, "description");
      arc.arc_type = parse_arc_type(field<std::string>(body, "arc_type"));
      arc.main_characters = character_ids(body, "main_characters", series);
      arc.arc_id = engine.ids.next_unique("arc|" + series + "|manual|" + lowercase(arc.title),
                                          [&](const std::string& id) { return store.arc_exists(id); });
      if (body.contains("progressions")) {
        for (const auto& p : body["progressions"]) {
          if (!p.is_object()) fail(ErrorCode::MalformedInput, "progressions must be objects");
          arc.progressions.push_back(progression_from(p, arc));
        }
      }
      arc = order_progressions(std::move(arc));
      validate(arc);
      auto stored = mutate(series, [&] {
        store.insert_arc(arc);
        engine.semantic.upsert_arc_embedding(arc);
        return *store.arc(arc.arc_id);
      });
      res.status = 201;
      return stored;
    }));
    server.Get(R"(/arcs/([0-9a-f]+))", wrap([this](const auto& req, auto&) -> Json { return arc_or_404(req.matches[1]); }));
    server.Put(R"(/arcs/([0-9a-f]+))", wrap([this](const auto& req, auto&) -> Json {
      const auto body = parse_body(req);
      auto arc = arc_or_404(req.matches[1]);
      const auto before = arc;
      if (body.contains("title")) arc.title = field<std::string>(body, "title");
      if (body.contains("description")) arc.description = field<std::string>(body, "description");
      if (body.contains("arc_type")) arc.arc_type = parse_arc_type(field<std::string>(body, "arc_type"));
      if (body.contains("main_characters")) arc.main_characters = character_ids(body, "main_characters", arc.series);
      validate(arc);
      return mutate(arc.series, [&] {
        store.update_arc(arc);
        if (arc.title != before.title || arc.description != before.description) {
          engine.semantic.upsert_arc_embedding(arc);
        }
        return *store.arc(arc.arc_id);
      });
    }));
    server.Delete(R"(/arcs/([0-9a-f]+))", wrap([this](const auto& req, auto&) -> Json {
      auto arc = arc_or_404(req.matches[1]);
      mutate(arc.series, [&] { store.delete_arc(arc.arc_id); });
      return {{"ok", true}};
    }));
    server.Post("/arcs/merge", wrap([this](const auto& req, auto&) -> Json {
      const auto body = parse_body(req);
      auto keep = arc_or_404(field<std::string>(body, "keep"));
      auto remove = arc_or_404(field<std::string>(body, "remove"));
      return mutate(keep.series, [&] {
        ensure_unlocked(remove.series);
        return store.merge_arcs(keep.arc_id, remove.arc_id);
      });
    }));

    // progressions
    server.Post(R"(/arcs/([0-9a-f]+)/progressions)", wrap([this](const auto& req, auto& res) -> Json {
      const auto body = parse_body(req);
      auto arc = arc_or_404(req.matches[1]);
      auto p = progression_from(body, arc);
      auto candidate = arc;
      candidate.progressions.push_back(p);
      validate(order_progressions(candidate));
      mutate(arc.series, [&] { store.insert_progression(p); });
      res.status = 201;
      return p;
    }));
    server.Post(R"(/arcs/([0-9a-f]+)/progressions/draft)", wrap([this](const auto& req, auto&) -> Json {
      const auto body = parse_body(req);
      auto arc = arc_or_404(req.matches[1]);
      EpisodeKey key{arc.series, field<int>(body, "season"), field<int>(body, "episode")};
      auto draft = pipeline::regenerate_progression(store, engine.gateway, engine.prompts, arc.arc_id, key);
      return {{"draft", draft}, {"persisted", false}};
    }));
    server.Put(R"(/progressions/([0-9a-f]+))", wrap([this](const auto& req, auto&) -> Json {
      const auto body = parse_body(req);
      auto p = store.progression(req.matches[1]);
      if (!p) fail(ErrorCode::NotFound, "progression " + std::string(req.matches[1]));
      if (body.contains("content")) p->content = field<std::string>(body, "content");
      if (body.contains("interfering_characters")) {
        p->interfering_characters = character_ids(body, "interfering_characters", p->series);
      }
      auto arc = arc_or_404(p->arc_id);
      for (auto& q : arc.progressions) {
        if (q.progression_id == p->progression_id) q = *p;
      }
      validate(arc);
      mutate(p->series, [&] { store.update_progression(*p); });
      return *store.progression(p->progression_id);
    }));
    server.Delete(R"(/progressions/([0-9a-f]+))", wrap([this](const auto& req, auto&) -> Json {
      auto p = store.progression(req.matches[1]);
      if (!p) fail(ErrorCode::NotFound, "progression " + std::string(req.matches[1]));
      mutate(p->series, [&] { store.delete_progression(p->progression_id); });
      return {{"ok", true}};
    }));

    // characters
    server.Get(R"(/series/([^/]+)/characters)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      return store.characters(series);
    }));
    server.Get(R"(/series/([^/]+)/characters/duplicates)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      const double threshold = query_double(req, "threshold", 0.5);
      auto registry = store.characters(series);
      auto dismissed = store.dismissed_pairs(series);
      std::map<std::string, const Character*> by_id;
      for (const auto& c : registry) by_id[c.character_id] = &c;
      Json out = Json::array();
      for (const auto& s : registry::suggest_duplicates(registry, threshold)) {
        if (dismissed.contains({s.first_id, s.second_id})) continue;
        out.push_back({{"first", *by_id[s.first_id]}, {"second", *by_id[s.second_id]}, {"score", s.score}});
      }
      return out;
    }));
    server.Post(R"(/series/([^/]+)/characters/dismiss)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      const auto body = parse_body(req);
      auto a = field<std::string>(body, "first");
      auto b = field<std::string>(body, "second");
      for (const auto& id : {a, b}) {
        auto c = store.character(id);
        if (!c || c->series != series) fail(ErrorCode::NotFound, "character " + id + " in " + series);
      }
      mutate(series, [&] { store.dismiss_pair(series, std::min(a, b), std::max(a, b)); });
      return {{"ok", true}};
    }));
    server.Post("/characters/merge", wrap([this](const auto& req, auto&) -> Json {
      const auto body = parse_body(req);
      auto keep = field<std::string>(body, "keep");
      auto remove = field<std::string>(body, "remove");
      if (keep == remove) fail(ErrorCode::SelfMerge, "cannot merge character " + keep + " into itself");
      auto c = store.character(keep);
      if (!c) fail(ErrorCode::NotFound, "character " + keep);
      return mutate(c->series, [&] { return registry::merge_characters(keep, remove, store); });
    }));
    server.Put(R"(/characters/([0-9a-f]+))", wrap([this](const auto& req, auto&) -> Json {
      const auto body = parse_body(req);
      auto c = store.character(req.matches[1]);
      if (!c) fail(ErrorCode::NotFound, "character " + std::string(req.matches[1]));
      if (body.contains("preferred_name")) c->preferred_name = field<std::string>(body, "preferred_name");
      if (body.contains("alternative_names")) {
        auto names = field<std::vector<std::string>>(body, "alternative_names");
        c->alternative_names = {names.begin(), names.end()};
      }
      auto registry = store.characters(c->series);
      for (auto& r : registry) {
        if (r.character_id == c->character_id) r = *c;
      }
      auto report = validate_registry(registry);
      if (!report.ok()) throw Invalid("character " + c->character_id + " breaks the registry rules", report);
      mutate(c->series, [&] { store.update_character(*c); });
      return *c;
    }));

    // views
    server.Get(R"(/series/([^/]+)/seasons/(\d+)/timeline)", wrap([this](const auto& req, auto&) -> Json {
      return timeline(req.matches[1], to_int(req.matches[2], "season"), req);
    }));
    server.Get(R"(/series/([^/]+)/clusters)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      const double threshold = query_double(req, "threshold", engine.config.semantic.cluster_threshold);
      return {{"threshold", threshold}, {"clusters", engine.semantic.cluster_arcs(series, threshold)}};
    }));
    server.Get(R"(/series/([^/]+)/pca3d)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      return semantic::to_json(engine.semantic.pca_project_3d(series));
    }));

    // pipeline
    server.Post(R"(/series/([^/]+)/seasons/(\d+)/episodes/(\d+)/run)", wrap([this](const auto& req, auto&) -> Json {
      EpisodeKey key{req.matches[1], to_int(req.matches[2], "season"), to_int(req.matches[3], "episode")};
      return engine.pipeline.run_episode(key);
    }));
    server.Get(R"(/series/([^/]+)/runs/(\d+)/(\d+))", wrap([this](const auto& req, auto&) -> Json {
      EpisodeKey key{req.matches[1], to_int(req.matches[2], "season"), to_int(req.matches[3], "episode")};
      auto report = store.run(key);
      if (!report) fail(ErrorCode::NotFound, "no run for " + key.series + " " + key.code());
      return *report;
    }));
    server.Get(R"(/series/([^/]+)/export)", wrap([this](const auto& req, auto&) -> Json {
      const std::string series = req.matches[1];
      if (!store.series(series)) fail(ErrorCode::NotFound, "series " + series);
      return store.export_json(series);
    }));
  }
};

ApiService::ApiService(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}
ApiService::~ApiService() = default;

bool ApiService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int ApiService::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool ApiService::listen_after_bind() { return impl_->server.listen_after_bind(); }
void ApiService::stop() { impl_->server.stop(); }
void ApiService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace arcweaver::api
