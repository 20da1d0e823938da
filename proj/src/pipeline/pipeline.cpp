#include "arcweaver/pipeline/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "arcweaver/core/error.hpp"
#include "arcweaver/registry/registry.hpp"

namespace arcweaver::pipeline {
namespace {

using Props = std::vector<std::pair<std::string, Json>>;

Json text(int min_length = 1) { return {{"type", "string"}, {"minLength", min_length}}; }
Json texts() { return {{"type", "array"}, {"items", text()}}; }
Json boolean() { return {{"type", "boolean"}}; }
Json one_of(std::vector<std::string> values) { return {{"enum", std::move(values)}}; }

Json object(const Props& props) {
  Json properties = Json::object();
  Json required = Json::array();
  for (const auto& [name, schema] : props) {
    properties[name] = schema;
    required.push_back(name);
  }
  return {{"type", "object"}, {"required", required}, {"additionalProperties", false}, {"properties", properties}};
}

Json array_of(Json items, std::optional<std::size_t> min = {}, std::optional<std::size_t> max = {}) {
  Json a = {{"type", "array"}, {"items", std::move(items)}};
  if (min) a["minItems"] = *min;
  if (max) a["maxItems"] = *max;
  return a;
}

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Every expected handle appears exactly once under `key`.
std::string each_once(const Json& items, const char* key, const std::vector<std::string>& expected) {
  std::map<std::string, int> seen;
  for (const auto& item : items) {
    const auto ref = item[key].get<std::string>();
    if (std::find(expected.begin(), expected.end(), ref) == expected.end()) {
      return std::string(key) + " '" + ref + "' is not one of the listed items";
    }
    if (++seen[ref] > 1) return std::string(key) + " '" + ref + "' appears twice";
  }
  for (const auto& ref : expected) {
    if (!seen.contains(ref)) return std::string(key) + " '" + ref + "' is missing";
  }
  return {};
}

std::vector<std::string> draft_ids(const std::vector<DraftArc>& drafts, bool running_only = false) {
  std::vector<std::string> out;
  for (const auto& d : drafts) {
    if (!running_only || d.arc_type != ArcType::Anthology) out.push_back(d.draft_id);
  }
  return out;
}

DraftArc* find_draft(std::vector<DraftArc>& drafts, const std::string& id) {
  auto it = std::find_if(drafts.begin(), drafts.end(), [&](const DraftArc& d) { return d.draft_id == id; });
  return it == drafts.end() ? nullptr : &*it;
}

std::size_t position(const std::vector<DraftArc>& drafts, const std::string& id) {
  return static_cast<std::size_t>(
      std::find_if(drafts.begin(), drafts.end(), [&](const DraftArc& d) { return d.draft_id == id; }) -
      drafts.begin());
}

EpisodeKey first_key(const NarrativeArc& arc) {
  return arc.progressions.empty() ? EpisodeKey{arc.series, 0, 0} : arc.progressions.front().key();
}

std::string arc_type_name(ArcType t) { return std::string(to_string(t)); }

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Pending: return "pending";
    case Stage::FlagExisting: return "agent1_flag_existing";
    case Stage::ExtractAnthology: return "agent2_extract_anthology";
    case Stage::ExtractRunning: return "agent3_extract_running";
    case Stage::OptimizeSeason: return "agent4_optimize_season";
    case Stage::Deduplicate: return "agent5_deduplicate";
    case Stage::Enhance: return "agent6_enhance";
    case Stage::VerifyProgressions: return "agent7_verify_progressions";
    case Stage::VerifyRoles: return "agent8_verify_roles";
    case Stage::FinalReview: return "agent9_final_review";
    case Stage::Done: return "done";
  }
  return "pending";
}

const std::vector<Stage>& agent_stages() {
  static const std::vector<Stage> stages = {
      Stage::FlagExisting,  Stage::ExtractAnthology,   Stage::ExtractRunning,
      Stage::OptimizeSeason, Stage::Deduplicate,       Stage::Enhance,
      Stage::VerifyProgressions, Stage::VerifyRoles,   Stage::FinalReview};
  return stages;
}

const DraftArc* PipelineState::draft(const std::string& draft_id) const {
  for (const auto& d : candidate_arcs) {
    if (d.draft_id == draft_id) return &d;
  }
  return nullptr;
}

std::string PipelineState::arc_ref(const std::string& arc_id) const {
  for (std::size_t i = 0; i < season_arcs.size(); ++i) {
    if (season_arcs[i].arc_id == arc_id) return "A" + std::to_string(i + 1);
  }
  return {};
}

const NarrativeArc* PipelineState::arc_by_ref(const std::string& ref) const {
  for (std::size_t i = 0; i < season_arcs.size(); ++i) {
    if ("A" + std::to_string(i + 1) == ref) return &season_arcs[i];
  }
  return nullptr;
}

ArcPipeline::ArcPipeline(Store& store, LlmGateway& gateway, PromptLibrary& prompts,
                         semantic::SemanticStore& semantic, IdGenerator& ids, PipelineOptions options)
    : store_(store), gateway_(gateway), prompts_(prompts), semantic_(semantic), ids_(ids),
      options_(std::move(options)) {}

void ArcPipeline::enter(PipelineState& state, Stage stage) {
  const auto& order = agent_stages();
  auto it = std::find(order.begin(), order.end(), stage);
  const Stage expected = it == order.begin() ? Stage::Pending : *(it - 1);
  if (state.stage != expected) {
    fail(ErrorCode::Precondition, std::string(to_string(stage)) + " must follow " +
                                      std::string(to_string(expected)) + ", state is at " +
                                      std::string(to_string(state.stage)));
  }
  if (stage_hook_) stage_hook_(stage);
  state.stage = stage;
}

Json ArcPipeline::base_context(const PipelineState& state) const {
  Json characters = Json::array();
  for (const auto& c : state.registry) {
    characters.push_back({{"name", c.preferred_name}, {"alternative_names", c.alternative_names}});
  }
  Json arcs = Json::array();
  for (std::size_t i = 0; i < state.season_arcs.size(); ++i) {
    const auto& a = state.season_arcs[i];
    arcs.push_back({{"arc", "A" + std::to_string(i + 1)},
                    {"title", a.title},
                    {"description", a.description},
                    {"arc_type", arc_type_name(a.arc_type)},
                    {"latest_progression", a.progressions.empty() ? "" : a.progressions.back().content}});
  }
  return {{"series", state.episode.series},
          {"genre", state.genre},
          {"season", state.episode.season},
          {"episode", state.episode.code()},
          {"episode_plot", state.plot},
          {"season_summary", state.season_summary},
          {"characters", characters},
          {"season_arcs", arcs}};
}

Json ArcPipeline::draft_view(const PipelineState& state, const DraftArc& d) const {
  auto names = [&](const std::set<std::string>& ids) {
    Json out = Json::array();
    for (const auto& id : ids) {
      for (const auto& c : state.registry) {
        if (c.character_id == id) out.push_back(c.preferred_name);
      }
    }
    return out;
  };
  return {{"draft", d.draft_id},
          {"title", d.title},
          {"description", d.description},
          {"arc_type", arc_type_name(d.arc_type)},
          {"continues", d.is_existing() ? state.arc_ref(d.existing_arc_id) : ""},
          {"progression", d.progression},
          {"main_characters", names(d.main_characters)},
          {"interfering_characters", names(d.interfering_characters)}};
}

DraftArc& ArcPipeline::new_draft(PipelineState& state) {
  DraftArc d;
  d.draft_id = "d" + std::to_string(state.next_draft++);
  state.candidate_arcs.push_back(std::move(d));
  return state.candidate_arcs.back();
}

void ArcPipeline::drop_draft(PipelineState& state, const std::string& draft_id, Stage stage,
                             const std::string& reason) {
  auto it = std::find_if(state.candidate_arcs.begin(), state.candidate_arcs.end(),
                         [&](const DraftArc& d) { return d.draft_id == draft_id; });
  if (it == state.candidate_arcs.end()) return;
  state.drops.push_back({{"stage", to_string(stage)},
                         {"draft", it->draft_id},
                         {"title", it->title},
                         {"arc_type", arc_type_name(it->arc_type)},
                         {"reason", reason}});
  state.candidate_arcs.erase(it);
}

void ArcPipeline::reject_flag(PipelineState& state, const std::string& arc_id, Stage stage,
                              const std::string& reason) {
  auto it = std::find_if(state.flagged_arcs.begin(), state.flagged_arcs.end(),
                         [&](const ArcFlag& f) { return f.arc_id == arc_id; });
  if (it == state.flagged_arcs.end()) return;
  std::string title;
  for (const auto& a : state.season_arcs) {
    if (a.arc_id == arc_id) title = a.title;
  }
  state.rejected_flags.push_back({{"stage", to_string(stage)}, {"arc_id", arc_id}, {"title", title}, {"reason", reason}});
  state.flagged_arcs.erase(it);
  std::erase_if(state.candidate_arcs, [&](const DraftArc& d) { return d.existing_arc_id == arc_id; });
}

PipelineState ArcPipeline::prepare(const EpisodeKey& key) {
  auto doc = store_.episode(key);
  if (!doc) fail(ErrorCode::NotFound, "episode " + key.series + " " + key.code() + " not ingested");
  if (store_.processed(key)) {
    fail(ErrorCode::AlreadyProcessed, "episode " + key.series + " " + key.code() + " was already processed");
  }
  for (const auto& e : store_.episodes(key.series, key.season)) {
    if (e.key.episode < key.episode && !store_.processed(e.key)) {
      fail(ErrorCode::OutOfOrderEpisode,
           key.code() + " cannot run before " + e.key.code() + " of " + key.series + " is processed");
    }
  }
  if (doc->normalized_plot.empty() || doc->episode_summary.empty()) {
    fail(ErrorCode::Precondition, "episode " + key.series + " " + key.code() + " is not preprocessed");
  }
  auto summary = store_.season_summary(key.series, key.season);
  if (!summary) {
    fail(ErrorCode::Precondition,
         "season " + std::to_string(key.season) + " of " + key.series + " has no season summary");
  }

  PipelineState state;
  state.episode = key;
  state.plot = doc->normalized_plot;
  state.season_summary = *summary;
  if (auto info = store_.series(key.series)) state.genre = info->genre;
  state.registry = store_.characters(key.series);
  state.chat_calls_at_start = gateway_.chat_calls();
  state.embed_calls_at_start = gateway_.embed_calls();
  state.season_arcs = store_.arcs_in_season(key.series, key.season);
  std::sort(state.season_arcs.begin(), state.season_arcs.end(), [](const NarrativeArc& a, const NarrativeArc& b) {
    const auto ka = first_key(a);
    const auto kb = first_key(b);
    return std::tie(ka, a.title, a.arc_id) < std::tie(kb, b.title, b.arc_id);
  });
  return state;
}

PipelineState ArcPipeline::agent1_flag_existing(PipelineState state) {
  enter(state, Stage::FlagExisting);
  std::vector<std::string> refs;
  Json arcs = Json::array();
  for (std::size_t i = 0; i < state.season_arcs.size(); ++i) {
    const auto& a = state.season_arcs[i];
    if (a.arc_type == ArcType::Anthology) continue;
    refs.push_back("A" + std::to_string(i + 1));
    arcs.push_back({{"arc", refs.back()},
                    {"title", a.title},
                    {"description", a.description},
                    {"arc_type", arc_type_name(a.arc_type)},
                    {"latest_progression", a.progressions.empty() ? "" : a.progressions.back().content}});
  }
  if (refs.empty()) return state;

  auto context = base_context(state);
  context["prior_arcs"] = arcs;
  auto schema = object({{"decisions", array_of(object({{"arc", text()}, {"present", boolean()}, {"rationale", text()}}),
                                               refs.size(), refs.size())}});
  auto check = [&](const Json& doc) { return each_once(doc["decisions"], "arc", refs); };
  auto result = gateway_.chat_structured(prompts_.request("agent1_flag_existing", context, schema), check);

  std::map<std::string, Json> by_ref;
  for (const auto& d : result.document["decisions"]) by_ref[d["arc"].get<std::string>()] = d;
  for (const auto& ref : refs) {
    const auto& d = by_ref[ref];
    if (d["present"].get<bool>()) {
      state.flagged_arcs.push_back({state.arc_by_ref(ref)->arc_id, d["rationale"].get<std::string>()});
    }
  }
  return state;
}

PipelineState ArcPipeline::agent2_extract_anthology(PipelineState state) {
  enter(state, Stage::ExtractAnthology);
  auto schema = object({{"arcs", array_of(object({{"title", text()}, {"description", text()}, {"progression", text()}}))}});
  auto result = gateway_.chat_structured(prompts_.request("agent2_extract_anthology", base_context(state), schema));
  for (const auto& a : result.document["arcs"]) {
    auto& d = new_draft(state);
    d.title = trimmed(a["title"].get<std::string>());
    d.description = a["description"].get<std::string>();
    d.progression = a["progression"].get<std::string>();
    d.arc_type = ArcType::Anthology;
  }
  return state;
}

PipelineState ArcPipeline::agent3_extract_running(PipelineState state) {
  enter(state, Stage::ExtractRunning);
  std::vector<std::string> refs;
  Json flagged = Json::array();
  for (const auto& f : state.flagged_arcs) {
    refs.push_back(state.arc_ref(f.arc_id));
    flagged.push_back({{"arc", refs.back()}, {"rationale", f.rationale}});
  }
  Json anthology = Json::array();
  for (const auto& d : state.candidate_arcs) anthology.push_back(draft_view(state, d));

  auto context = base_context(state);
  context["flagged_arcs"] = flagged;
  context["anthology_drafts"] = anthology;
  auto schema = object(
      {{"new_arcs", array_of(object({{"title", text()},
                                     {"description", text()},
                                     {"arc_type", one_of({"Soap", "GenreSpecific"})},
                                     {"progression", text()}}))},
       {"flag_decisions", array_of(object({{"arc", text()},
                                           {"confirmed", boolean()},
                                           {"progression", text(0)},
                                           {"rationale", text()}}),
                                   refs.size(), refs.size())}});
  auto check = [&](const Json& doc) -> std::string {
    if (auto err = each_once(doc["flag_decisions"], "arc", refs); !err.empty()) return err;
    for (const auto& d : doc["flag_decisions"]) {
      if (d["confirmed"].get<bool>() && trimmed(d["progression"].get<std::string>()).empty()) {
        return "confirmed arc " + d["arc"].get<std::string>() + " needs progression text";
      }
    }
    return {};
  };
  auto result = gateway_.chat_structured(prompts_.request("agent3_extract_running", context, schema), check);

  std::map<std::string, Json> by_ref;
  for (const auto& d : result.document["flag_decisions"]) by_ref[d["arc"].get<std::string>()] = d;
  for (const auto& ref : refs) {
    const auto& decision = by_ref[ref];
    const auto* arc = state.arc_by_ref(ref);
    if (!decision["confirmed"].get<bool>()) {
      reject_flag(state, arc->arc_id, Stage::ExtractRunning, decision["rationale"].get<std::string>());
      continue;
    }
    auto& d = new_draft(state);
    d.existing_arc_id = arc->arc_id;
    d.title = arc->title;
    d.description = arc->description;
    d.arc_type = arc->arc_type;
    d.main_characters = arc->main_characters;
    d.progression = decision["progression"].get<std::string>();
    d.notes.push_back(decision["rationale"].get<std::string>());
  }
  for (const auto& a : result.document["new_arcs"]) {
    auto& d = new_draft(state);
    d.title = trimmed(a["title"].get<std::string>());
    d.description = a["description"].get<std::string>();
    d.arc_type = parse_arc_type(a["arc_type"].get<std::string>());
    d.progression = a["progression"].get<std::string>();
  }
  return state;
}

PipelineState ArcPipeline::agent4_optimize_season(PipelineState state) {
  enter(state, Stage::OptimizeSeason);
  const auto running = draft_ids(state.candidate_arcs, true);
  if (running.size() < 2) return state;

  Json drafts = Json::array();
  for (const auto& d : state.candidate_arcs) {
    if (d.arc_type != ArcType::Anthology) drafts.push_back(draft_view(state, d));
  }
  auto context = base_context(state);
  context["drafts"] = drafts;
  auto schema = object({{"merges", array_of(object({{"drafts", array_of(text(), 2)},
                                                    {"title", text()},
                                                    {"description", text()},
                                                    {"progression", text()},
                                                    {"rationale", text()}}))},
                        {"refinements", array_of(object({{"draft", text()},
                                                         {"title", text()},
                                                         {"description", text()},
                                                         {"rationale", text()}}))}});
  auto is_running = [&](const std::string& id) {
    return std::find(running.begin(), running.end(), id) != running.end();
  };
  auto check = [&](const Json& doc) -> std::string {
    std::set<std::string> used;
    for (const auto& m : doc["merges"]) {
      std::set<ArcType> types;
      int existing = 0;
      for (const auto& ref : m["drafts"]) {
        const auto id = ref.get<std::string>();
        if (!is_running(id)) return "'" + id + "' is not a soap or genre-specific draft";
        if (!used.insert(id).second) return "draft '" + id + "' is listed in more than one merge";
        const auto* d = state.draft(id);
        types.insert(d->arc_type);
        existing += d->is_existing() ? 1 : 0;
      }
      if (types.size() > 1) return "a merge may only combine drafts of the same arc_type";
      if (existing > 1) return "a merge may continue at most one existing arc";
    }
    for (const auto& r : doc["refinements"]) {
      const auto id = r["draft"].get<std::string>();
      if (!is_running(id)) return "'" + id + "' is not a soap or genre-specific draft";
      if (used.contains(id)) return "draft '" + id + "' is both merged and refined";
      if (state.draft(id)->is_existing()) return "draft '" + id + "' continues a stored arc and keeps its title";
    }
    return {};
  };
  auto result = gateway_.chat_structured(prompts_.request("agent4_optimize_season", context, schema), check);

  for (const auto& m : result.document["merges"]) {
    std::vector<std::string> members;
    for (const auto& ref : m["drafts"]) members.push_back(ref.get<std::string>());
    std::sort(members.begin(), members.end(), [&](const std::string& a, const std::string& b) {
      return position(state.candidate_arcs, a) < position(state.candidate_arcs, b);
    });
    std::string survivor_id = members.front();
    for (const auto& id : members) {
      if (state.draft(id)->is_existing()) survivor_id = id;
    }
    auto& survivor = *find_draft(state.candidate_arcs, survivor_id);
    if (!survivor.is_existing()) {
      survivor.title = trimmed(m["title"].get<std::string>());
      survivor.description = m["description"].get<std::string>();
    }
    survivor.progression = m["progression"].get<std::string>();
    survivor.notes.push_back(m["rationale"].get<std::string>());
    for (const auto& id : members) {
      if (id == survivor_id) continue;
      const auto* other = state.draft(id);
      survivor.main_characters.insert(other->main_characters.begin(), other->main_characters.end());
      survivor.interfering_characters.insert(other->interfering_characters.begin(),
                                             other->interfering_characters.end());
    }
    state.merges.push_back({{"stage", to_string(Stage::OptimizeSeason)},
                            {"drafts", members},
                            {"into", survivor_id},
                            {"title", survivor.title},
                            {"rationale", m["rationale"]}});
    std::erase_if(state.candidate_arcs, [&](const DraftArc& d) {
      return d.draft_id != survivor_id && std::find(members.begin(), members.end(), d.draft_id) != members.end();
    });
  }
  for (const auto& r : result.document["refinements"]) {
    auto* d = find_draft(state.candidate_arcs, r["draft"].get<std::string>());
    d->title = trimmed(r["title"].get<std::string>());
    d->description = r["description"].get<std::string>();
    d->notes.push_back(r["rationale"].get<std::string>());
  }
  return state;
}

PipelineState ArcPipeline::agent5_deduplicate(PipelineState state) {
  enter(state, Stage::Deduplicate);
  const auto all = draft_ids(state.candidate_arcs);
  if (all.size() < 2) return state;

  Json drafts = Json::array();
  for (const auto& d : state.candidate_arcs) drafts.push_back(draft_view(state, d));
  auto context = base_context(state);
  context["drafts"] = drafts;
  auto schema = object({{"resolutions", array_of(object({{"drafts", array_of(text(), 2)},
                                                         {"keep", text()},
                                                         {"arc_type", one_of({"Anthology", "Soap", "GenreSpecific"})},
                                                         {"title", text()},
                                                         {"description", text()},
                                                         {"rationale", text()}}))}});
  auto check = [&](const Json& doc) -> std::string {
    std::set<std::string> used;
    std::set<std::string> removed;
    std::map<std::string, std::string> retitled;
    for (const auto& r : doc["resolutions"]) {
      std::set<ArcType> types;
      const DraftArc* existing = nullptr;
      bool keep_listed = false;
      const auto keep = r["keep"].get<std::string>();
      for (const auto& ref : r["drafts"]) {
        const auto id = ref.get<std::string>();
        const auto* d = state.draft(id);
        if (!d) return "unknown draft '" + id + "'";
        if (!used.insert(id).second) return "draft '" + id + "' is listed in more than one resolution";
        types.insert(d->arc_type);
        if (d->is_existing()) {
          if (existing) return "a resolution may continue at most one existing arc";
          existing = d;
        }
        keep_listed = keep_listed || id == keep;
        if (id != keep) removed.insert(id);
      }
      if (!keep_listed) return "keep '" + keep + "' must be one of the resolution's drafts";
      if (types.size() < 2 && !types.contains(ArcType::Anthology)) {
        return "same-type overlaps between running drafts are not resolved here";
      }
      if (existing) {
        if (existing->draft_id != keep) return "a resolution involving a stored arc must keep " + existing->draft_id;
        if (r["arc_type"].get<std::string>() != arc_type_name(existing->arc_type)) {
          return "draft " + existing->draft_id + " continues a stored arc and keeps its arc_type";
        }
      } else {
        retitled[keep] = trimmed(r["title"].get<std::string>());
      }
    }
    std::map<std::string, std::string> titles;
    for (const auto& d : state.candidate_arcs) {
      if (removed.contains(d.draft_id)) continue;
      const auto title = retitled.contains(d.draft_id) ? retitled[d.draft_id] : d.title;
      auto [it, fresh] = titles.emplace(lowercase(title), d.draft_id);
      if (!fresh) return "drafts " + it->second + " and " + d.draft_id + " would share the title '" + title + "'";
    }
    return {};
  };
  auto result = gateway_.chat_structured(prompts_.request("agent5_deduplicate", context, schema), check);

  for (const auto& r : result.document["resolutions"]) {
    const auto keep_id = r["keep"].get<std::string>();
    auto& keep = *find_draft(state.candidate_arcs, keep_id);
    if (!keep.is_existing()) {
      keep.arc_type = parse_arc_type(r["arc_type"].get<std::string>());
      keep.title = trimmed(r["title"].get<std::string>());
      keep.description = r["description"].get<std::string>();
    }
    const auto rationale = r["rationale"].get<std::string>();
    keep.notes.push_back(rationale);
    std::vector<std::string> members;
    for (const auto& ref : r["drafts"]) members.push_back(ref.get<std::string>());
    for (const auto& id : members) {
      if (id == keep_id) continue;
      const auto* other = state.draft(id);
      keep.main_characters.insert(other->main_characters.begin(), other->main_characters.end());
      keep.interfering_characters.insert(other->interfering_characters.begin(),
                                         other->interfering_characters.end());
    }
    state.merges.push_back({{"stage", to_string(Stage::Deduplicate)},
                            {"drafts", members},
                            {"into", keep_id},
                            {"title", keep.title},
                            {"arc_type", arc_type_name(keep.arc_type)},
                            {"rationale", rationale}});
    for (const auto& id : members) {
      if (id != keep_id) drop_draft(state, id, Stage::Deduplicate, "resolved into " + keep_id + ": " + rationale);
    }
  }
  return state;
}

PipelineState ArcPipeline::agent6_enhance(PipelineState state) {
  enter(state, Stage::Enhance);
  const auto ids = draft_ids(state.candidate_arcs);
  if (ids.empty()) return state;

  Json drafts = Json::array();
  for (const auto& d : state.candidate_arcs) drafts.push_back(draft_view(state, d));
  auto context = base_context(state);
  context["drafts"] = drafts;
  auto schema = object({{"drafts", array_of(object({{"draft", text()},
                                                    {"main_characters", texts()},
                                                    {"interfering_characters", texts()},
                                                    {"progression", text()}}),
                                            ids.size(), ids.size())}});
  auto check = [&](const Json& doc) { return each_once(doc["drafts"], "draft", ids); };
  auto result = gateway_.chat_structured(prompts_.request("agent6_enhance", context, schema), check);

  for (const auto& e : result.document["drafts"]) {
    auto& d = *find_draft(state.candidate_arcs, e["draft"].get<std::string>());
    auto resolve = [&](const Json& names, const char* role) {
      std::set<std::string> out;
      for (const auto& n : names) {
        const auto name = n.get<std::string>();
        const auto id = registry::resolve_name(name, state.registry);
        if (id.empty()) {
          state.warnings.push_back(d.draft_id + " (" + d.title + "): unknown " + role + " character '" + name +
                                   "' dropped");
        } else {
          out.insert(id);
        }
      }
      return out;
    };
    auto main = resolve(e["main_characters"], "main");
    auto interfering = resolve(e["interfering_characters"], "interfering");
    d.main_characters.insert(main.begin(), main.end());
    d.interfering_characters = std::move(interfering);
    d.progression = e["progression"].get<std::string>();
  }
  return state;
}

PipelineState ArcPipeline::agent7_verify_progressions(PipelineState state) {
  enter(state, Stage::VerifyProgressions);
  const auto ids = draft_ids(state.candidate_arcs);
  if (ids.empty()) return state;

  Json drafts = Json::array();
  for (const auto& d : state.candidate_arcs) drafts.push_back(draft_view(state, d));
  auto context = base_context(state);
  context["drafts"] = drafts;
  auto schema = object({{"verdicts", array_of(object({{"draft", text()},
                                                      {"verdict", one_of({"accept", "rewrite", "irrelevant"})},
                                                      {"progression", text(0)},
                                                      {"rationale", text()}}),
                                              ids.size(), ids.size())}});
  auto check = [&](const Json& doc) -> std::string {
    if (auto err = each_once(doc["verdicts"], "draft", ids); !err.empty()) return err;
    for (const auto& v : doc["verdicts"]) {
      if (v["verdict"] == "rewrite" && trimmed(v["progression"].get<std::string>()).empty()) {
        return "rewrite of " + v["draft"].get<std::string>() + " needs the new progression text";
      }
    }
    return {};
  };
  auto result = gateway_.chat_structured(prompts_.request("agent7_verify_progressions", context, schema), check);

  for (const auto& v : result.document["verdicts"]) {
    const auto id = v["draft"].get<std::string>();
    const auto verdict = v["verdict"].get<std::string>();
    const auto rationale = v["rationale"].get<std::string>();
    auto* d = find_draft(state.candidate_arcs, id);
    if (verdict == "rewrite") {
      d->progression = v["progression"].get<std::string>();
      d->notes.push_back(rationale);
    }
    if (verdict == "irrelevant" || trimmed(d->progression).empty()) {
      if (d->is_existing()) {
        reject_flag(state, d->existing_arc_id, Stage::VerifyProgressions, rationale);
        std::erase_if(state.candidate_arcs, [&](const DraftArc& x) { return x.draft_id == id; });
      } else {
        drop_draft(state, id, Stage::VerifyProgressions, rationale);
      }
    }
  }
  return state;
}

PipelineState ArcPipeline::agent8_verify_roles(PipelineState state) {
  enter(state, Stage::VerifyRoles);
  const auto ids = draft_ids(state.candidate_arcs);
  if (ids.empty()) return state;

  Json drafts = Json::array();
  for (const auto& d : state.candidate_arcs) drafts.push_back(draft_view(state, d));
  auto context = base_context(state);
  context["drafts"] = drafts;
  auto schema = object({{"roles", array_of(object({{"draft", text()},
                                                   {"verdict", one_of({"confirm", "reassign"})},
                                                   {"main_characters", texts()},
                                                   {"interfering_characters", texts()},
                                                   {"rationale", text()}}),
                                           ids.size(), ids.size())}});
  auto check = [&](const Json& doc) -> std::string {
    if (auto err = each_once(doc["roles"], "draft", ids); !err.empty()) return err;
    for (const auto& r : doc["roles"]) {
      if (r["verdict"] != "reassign") continue;
      for (const char* field : {"main_characters", "interfering_characters"}) {
        for (const auto& n : r[field]) {
          if (registry::resolve_name(n.get<std::string>(), state.registry).empty()) {
            return "'" + n.get<std::string>() + "' is not a known character";
          }
        }
      }
    }
    return {};
  };
  auto result = gateway_.chat_structured(prompts_.request("agent8_verify_roles", context, schema), check);

  for (const auto& r : result.document["roles"]) {
    if (r["verdict"] != "reassign") continue;
    auto* d = find_draft(state.candidate_arcs, r["draft"].get<std::string>());
    auto resolve = [&](const Json& names) {
      std::set<std::string> out;
      for (const auto& n : names) out.insert(registry::resolve_name(n.get<std::string>(), state.registry));
      return out;
    };
    d->main_characters = resolve(r["main_characters"]);
    d->interfering_characters = resolve(r["interfering_characters"]);
    d->notes.push_back(r["rationale"].get<std::string>());
  }
  return state;
}

Json ArcPipeline::agent9_final_review(PipelineState& state) {
  enter(state, Stage::FinalReview);
  const auto ids = draft_ids(state.candidate_arcs);
  if (!ids.empty()) {
    Json drafts = Json::array();
    for (const auto& d : state.candidate_arcs) drafts.push_back(draft_view(state, d));
    auto context = base_context(state);
    context["drafts"] = drafts;
    auto schema = object({{"reviews", array_of(object({{"draft", text()},
                                                       {"verdict", one_of({"approve", "reject"})},
                                                       {"rationale", text()}}),
                                               ids.size(), ids.size())}});
    auto check = [&](const Json& doc) { return each_once(doc["reviews"], "draft", ids); };
    auto result = gateway_.chat_structured(prompts_.request("agent9_final_review", context, schema), check);
    for (const auto& r : result.document["reviews"]) {
      if (r["verdict"] != "reject") continue;
      const auto id = r["draft"].get<std::string>();
      const auto* d = state.draft(id);
      if (d->is_existing()) {
        reject_flag(state, d->existing_arc_id, Stage::FinalReview, r["rationale"].get<std::string>());
      } else {
        drop_draft(state, id, Stage::FinalReview, r["rationale"].get<std::string>());
      }
    }
  }
  std::vector<std::string> orphaned;
  for (const auto& f : state.flagged_arcs) {
    bool has_progression = std::any_of(state.candidate_arcs.begin(), state.candidate_arcs.end(),
                                       [&](const DraftArc& d) { return d.existing_arc_id == f.arc_id; });
    if (!has_progression) orphaned.push_back(f.arc_id);
  }
  for (const auto& arc_id : orphaned) {
    reject_flag(state, arc_id, Stage::FinalReview, "flagged as possibly present but no progression was confirmed");
  }

  const auto& key = state.episode;
  const auto code = key.code();
  Json created = Json::array();
  Json extended = Json::array();
  Json linked = Json::array();
  Json report;
  store_.atomically([&] {
    std::size_t step = 0;
    int new_index = 0;
    for (const auto& d : state.candidate_arcs) {
      if (commit_hook_) commit_hook_(step);
      ++step;
      if (d.is_existing()) {
        auto arc = store_.arc(d.existing_arc_id);
        if (!arc) fail(ErrorCode::NotFound, "arc " + d.existing_arc_id);
        Progression p;
        p.progression_id = ids_.next_unique("progression|" + arc->arc_id + "|" + code,
                                            [&](const std::string& id) { return store_.progression_exists(id); });
        p.arc_id = arc->arc_id;
        p.content = d.progression;
        p.series = key.series;
        p.season = key.season;
        p.episode = key.episode;
        p.interfering_characters = d.interfering_characters;
        store_.insert_progression(p);
        if (!std::includes(arc->main_characters.begin(), arc->main_characters.end(), d.main_characters.begin(),
                           d.main_characters.end())) {
          arc->main_characters.insert(d.main_characters.begin(), d.main_characters.end());
          store_.update_arc(*arc);
        }
        extended.push_back({{"arc_id", arc->arc_id}, {"title", arc->title}, {"progression_id", p.progression_id}});
        continue;
      }
      ++new_index;
      NarrativeArc arc;
      arc.arc_id = ids_.next_unique("arc|" + key.series + "|" + code + "|" + std::to_string(new_index),
                                    [&](const std::string& id) { return store_.arc_exists(id); });
      arc.title = d.title;
      arc.description = d.description;
      arc.arc_type = d.arc_type;
      arc.main_characters = d.main_characters;
      arc.series = key.series;
      Progression p;
      p.progression_id = ids_.next_unique("progression|" + arc.arc_id + "|" + code,
                                          [&](const std::string& id) { return store_.progression_exists(id); });
      p.arc_id = arc.arc_id;
      p.content = d.progression;
      p.series = key.series;
      p.season = key.season;
      p.episode = key.episode;
      p.interfering_characters = d.interfering_characters;
      arc.progressions.push_back(p);
      auto outcome = semantic_.link_or_create(arc);
      if (outcome.linked) {
        linked.push_back({{"draft", d.draft_id},
                          {"title", d.title},
                          {"arc_id", outcome.final_arc_id},
                          {"progression_id", p.progression_id}});
      } else {
        created.push_back({{"arc_id", arc.arc_id},
                           {"title", arc.title},
                           {"arc_type", arc_type_name(arc.arc_type)},
                           {"progression_id", p.progression_id}});
      }
    }
    if (commit_hook_) commit_hook_(step);
    state.stage = Stage::Done;
    report = {{"series", key.series},
              {"season", key.season},
              {"episode", key.episode},
              {"code", code},
              {"created", created},
              {"extended", extended},
              {"linked", linked},
              {"merges", state.merges},
              {"drops", state.drops},
              {"rejected_flags", state.rejected_flags},
              {"warnings", state.warnings},
              {"gateway_call_count", gateway_.chat_calls() - state.chat_calls_at_start},
              {"embed_call_count", gateway_.embed_calls() - state.embed_calls_at_start}};
    store_.put_run(key, report);
  });
  return report;
}

Json ArcPipeline::run_episode(const EpisodeKey& key) {
  SeasonLock lock(store_, key.series, key.season, options_.lock_holder);
  auto state = prepare(key);
  state = agent1_flag_existing(std::move(state));
  state = agent2_extract_anthology(std::move(state));
  state = agent3_extract_running(std::move(state));
  state = agent4_optimize_season(std::move(state));
  state = agent5_deduplicate(std::move(state));
  state = agent6_enhance(std::move(state));
  state = agent7_verify_progressions(std::move(state));
  state = agent8_verify_roles(std::move(state));
  auto report = agent9_final_review(state);

  if (options_.runs_dir) {
    auto dir = *options_.runs_dir / key.series;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / (key.code() + ".json"), std::ios::binary);
    out << report.dump(2) << '\n';
    if (!out) fail(ErrorCode::Precondition, "cannot write run report under " + dir.string());
  }
  return report;
}

SeasonLock::SeasonLock(Store& store, std::string series, int season, std::string holder)
    : store_(store), series_(std::move(series)), season_(season), holder_(std::move(holder)) {
  if (!store_.try_lock_season(series_, season_, holder_)) {
    auto info = store_.season_lock(series_, season_);
    fail(ErrorCode::Conflict, "season " + std::to_string(season_) + " of " + series_ + " is locked by " +
                                  (info ? info->holder : std::string("another run")));
  }
}

SeasonLock::~SeasonLock() {
  try {
    store_.unlock_season(series_, season_, holder_);
  } catch (...) {
  }
}

Progression regenerate_progression(Store& store, LlmGateway& gateway, PromptLibrary& prompts,
                                   const std::string& arc_id, const EpisodeKey& key) {
  auto arc = store.arc(arc_id);
  if (!arc) fail(ErrorCode::NotFound, "arc " + arc_id);
  if (arc->series != key.series) fail(ErrorCode::Conflict, "arc " + arc_id + " belongs to " + arc->series);
  auto doc = store.episode(key);
  if (!doc) fail(ErrorCode::NotFound, "episode " + key.series + " " + key.code());
  const auto plot = doc->normalized_plot.empty() ? doc->raw_plot : doc->normalized_plot;
  auto registry = store.characters(key.series);

  Json earlier = Json::array();
  for (const auto& p : arc->progressions) {
    if (p.key() < key) earlier.push_back({{"episode", p.key().code()}, {"content", p.content}});
  }
  Json context = {{"series", key.series},
                  {"episode", key.code()},
                  {"episode_plot", plot},
                  {"title", arc->title},
                  {"description", arc->description},
                  {"arc_type", arc_type_name(arc->arc_type)},
                  {"earlier_progressions", earlier}};
  auto schema = object({{"content", text()}, {"interfering_characters", texts()}});
  auto result = gateway.chat_structured(prompts.request("regenerate_progression", context, schema));

  Progression p;
  p.arc_id = arc_id;
  p.series = key.series;
  p.season = key.season;
  p.episode = key.episode;
  p.content = result.document["content"].get<std::string>();
  for (const auto& n : result.document["interfering_characters"]) {
    auto id = registry::resolve_name(n.get<std::string>(), registry);
    if (!id.empty()) p.interfering_characters.insert(id);
  }
  return p;
}

std::vector<Json> run_season(ArcPipeline& pipeline, Store& store, const std::string& series, int season) {
  std::vector<Json> reports;
  auto episodes = store.episodes(series, season);
  require(!episodes.empty(), "no episodes ingested for " + series + " season " + std::to_string(season));
  for (const auto& e : episodes) {
    if (store.processed(e.key)) continue;
    reports.push_back(pipeline.run_episode(e.key));
  }
  return reports;
}

}  // namespace arcweaver::pipeline
