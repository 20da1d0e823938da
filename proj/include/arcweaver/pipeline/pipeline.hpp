#pragma once
// The nine-agent extraction workflow for one preprocessed episode.
//
// Agents 1-8 only transform an in-memory PipelineState; agent 9 commits the
// surviving drafts in one transaction. Drafts are referred to as "d1", "d2",
// ... and the season's stored arcs as "A1", "A2", ... in every prompt, so
// scripted and live responses never have to echo opaque ids.

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arcweaver/core/ids.hpp"
#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"
#include "arcweaver/gateway/prompts.hpp"
#include "arcweaver/persistence/store.hpp"
#include "arcweaver/semantic/semantic.hpp"

namespace arcweaver::pipeline {

enum class Stage {
  Pending,
  FlagExisting,
  ExtractAnthology,
  ExtractRunning,
  OptimizeSeason,
  Deduplicate,
  Enhance,
  VerifyProgressions,
  VerifyRoles,
  FinalReview,
  Done,
};

std::string_view to_string(Stage stage);
// The nine agent stages in execution order.
const std::vector<Stage>& agent_stages();

struct DraftArc {
  std::string draft_id;
  std::string title;
  std::string description;
  ArcType arc_type = ArcType::Soap;
  std::string existing_arc_id;  // set when the draft continues a stored arc
  std::set<std::string> main_characters;
  std::set<std::string> interfering_characters;
  std::string progression;
  std::vector<std::string> notes;

  bool is_existing() const { return !existing_arc_id.empty(); }
  bool operator==(const DraftArc&) const = default;
};

struct ArcFlag {
  std::string arc_id;
  std::string rationale;
  bool operator==(const ArcFlag&) const = default;
};

struct PipelineState {
  EpisodeKey episode;
  std::vector<NarrativeArc> season_arcs;  // committed arcs of the season, prompt order
  std::vector<ArcFlag> flagged_arcs;
  std::vector<DraftArc> candidate_arcs;
  Stage stage = Stage::Pending;

  std::string plot;
  std::string season_summary;
  std::string genre;
  std::vector<Character> registry;

  // Run-report material gathered along the way.
  Json merges = Json::array();
  Json drops = Json::array();
  Json rejected_flags = Json::array();
  std::vector<std::string> warnings;
  int next_draft = 1;
  std::size_t chat_calls_at_start = 0;
  std::size_t embed_calls_at_start = 0;

  const DraftArc* draft(const std::string& draft_id) const;
  // "A<n>" handle of a season arc, or empty.
  std::string arc_ref(const std::string& arc_id) const;
  const NarrativeArc* arc_by_ref(const std::string& ref) const;
};

struct PipelineOptions {
  std::optional<std::filesystem::path> runs_dir;  // run reports also go to runs/{series}/SxxEyy.json
  std::string lock_holder = "pipeline";
};

class ArcPipeline {
 public:
  ArcPipeline(Store& store, LlmGateway& gateway, PromptLibrary& prompts, semantic::SemanticStore& semantic,
              IdGenerator& ids, PipelineOptions options = {});

  // Loads everything the agents need. Throws NotFound, Precondition
  // (episode or season not preprocessed), AlreadyProcessed, OutOfOrderEpisode.
  PipelineState prepare(const EpisodeKey& key);

  PipelineState agent1_flag_existing(PipelineState state);
  PipelineState agent2_extract_anthology(PipelineState state);
  PipelineState agent3_extract_running(PipelineState state);
  PipelineState agent4_optimize_season(PipelineState state);
  PipelineState agent5_deduplicate(PipelineState state);
  PipelineState agent6_enhance(PipelineState state);
  PipelineState agent7_verify_progressions(PipelineState state);
  PipelineState agent8_verify_roles(PipelineState state);
  // Final consistency pass and the atomic commit; returns the run report.
  Json agent9_final_review(PipelineState& state);

  // Agents 1-9 under the season lock. The report is stored with the run.
  Json run_episode(const EpisodeKey& key);

  // Called on entry to every agent stage, and before each commit step of
  // agent 9 with its index; throwing aborts the run.
  void set_stage_hook(std::function<void(Stage)> hook) { stage_hook_ = std::move(hook); }
  void set_commit_hook(std::function<void(std::size_t)> hook) { commit_hook_ = std::move(hook); }

 private:
  void enter(PipelineState& state, Stage stage);
  Json base_context(const PipelineState& state) const;
  Json draft_view(const PipelineState& state, const DraftArc& d) const;
  DraftArc& new_draft(PipelineState& state);
  void drop_draft(PipelineState& state, const std::string& draft_id, Stage stage, const std::string& reason);
  void reject_flag(PipelineState& state, const std::string& arc_id, Stage stage, const std::string& reason);

  Store& store_;
  LlmGateway& gateway_;
  PromptLibrary& prompts_;
  semantic::SemanticStore& semantic_;
  IdGenerator& ids_;
  PipelineOptions options_;
  std::function<void(Stage)> stage_hook_;
  std::function<void(std::size_t)> commit_hook_;
};

// Holds a season lock for its lifetime; Conflict when another holder has it.
class SeasonLock {
 public:
  SeasonLock(Store& store, std::string series, int season, std::string holder);
  ~SeasonLock();
  SeasonLock(const SeasonLock&) = delete;
  SeasonLock& operator=(const SeasonLock&) = delete;

 private:
  Store& store_;
  std::string series_;
  int season_;
  std::string holder_;
};

// Drafts an arc's progression for one episode with a single gateway call.
// The returned progression has no id and is not stored.
Progression regenerate_progression(Store& store, LlmGateway& gateway, PromptLibrary& prompts,
                                   const std::string& arc_id, const EpisodeKey& key);

// Runs every not-yet-processed episode of the season in episode order.
std::vector<Json> run_season(ArcPipeline& pipeline, Store& store, const std::string& series, int season);

}  // namespace arcweaver::pipeline
