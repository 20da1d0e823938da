#pragma once
// Episode preprocessing: plot simplification, windowed pronoun resolution,
// entity extraction and normalization, and the two-step season summary.

#include <string>
#include <string_view>
#include <vector>

#include "arcweaver/core/ids.hpp"
#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"
#include "arcweaver/gateway/prompts.hpp"
#include "arcweaver/persistence/store.hpp"

namespace arcweaver::preprocess {

inline constexpr int kDefaultWindow = 15;

// Splits after '.', '!' or '?' when followed by whitespace or end of text.
// Delimiters stay with their sentence; sentences are trimmed; empty pieces
// are dropped.
std::vector<std::string> split_sentences(std::string_view text);
std::string join_sentences(const std::vector<std::string>& sentences);

struct SentenceWindow {
  std::vector<std::string> sentences;
  int first_index = 0;  // position of sentences[0] in the full text
  int center_index = 0;
  int window_size = kDefaultWindow;
};

// Non-overlapping blocks of at most window_size sentences covering every
// sentence once, in order.
std::vector<SentenceWindow> partition_windows(const std::vector<std::string>& sentences,
                                              int window_size = kDefaultWindow);

class Preprocessor {
 public:
  Preprocessor(LlmGateway& gateway, PromptLibrary& prompts, int window_size = kDefaultWindow);

  // Sets simplified_plot and clears later stages.
  EpisodeDoc simplify_plot(EpisodeDoc doc);
  // Rewrites simplified_plot window by window into normalized_plot; entity
  // normalization later refines normalized_plot in place.
  EpisodeDoc resolve_pronouns(EpisodeDoc doc);
  // De-duplicated person mentions of normalized_plot, first appearance order.
  std::vector<std::string> extract_entities(const EpisodeDoc& doc);
  EpisodeDoc summarize_episode(EpisodeDoc doc);
  // Episode summaries concatenated in episode order, summarized once more.
  std::string build_season_summary(const std::vector<EpisodeDoc>& docs);

 private:
  LlmGateway& gateway_;
  PromptLibrary& prompts_;
  int window_size_;
};

struct PreprocessReport {
  std::vector<std::string> episodes;        // codes preprocessed this call
  std::vector<std::string> skipped;         // already preprocessed
  std::size_t characters_changed = 0;
  bool season_summary_built = false;
};

// Runs every stage for one stored episode and saves the document together
// with registry changes in one transaction.
EpisodeDoc preprocess_episode(const EpisodeKey& key, Store& store, Preprocessor& pre,
                              LlmGateway& gateway, PromptLibrary& prompts, IdGenerator& ids,
                              std::size_t* characters_changed = nullptr);

// Preprocesses every episode of the season still lacking a summary, in
// episode order, then (re)builds the season summary.
PreprocessReport preprocess_season(const std::string& series, int season, Store& store,
                                   Preprocessor& pre, LlmGateway& gateway, PromptLibrary& prompts,
                                   IdGenerator& ids);

}  // namespace arcweaver::preprocess
