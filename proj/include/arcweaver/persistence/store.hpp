#pragma once
// Transactional store for every persisted entity, backed by one SQLite file.
//
// Every public operation is atomic on its own. Callers that need several
// operations to commit together open a Transaction; nested transactions become
// savepoints. All access serializes through one connection mutex.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"

struct sqlite3;

namespace arcweaver {

struct SeriesInfo {
  std::string name;
  std::string genre;
  bool operator==(const SeriesInfo&) const = default;
};

struct ArcEmbedding {
  std::string arc_id;
  EmbeddingVector vector;
  std::string source_text;
};

struct LinkAuditEntry {
  std::string series;
  std::string new_arc_id;
  std::string new_arc_title;
  std::string candidate_arc_id;
  std::string verdict;  // "SameStoryline" | "Distinct"
  std::string rationale;
  double score = 0.0;
  std::string final_arc_id;
};

struct SeasonLockInfo {
  std::string series;
  int season = 0;
  std::string holder;
};

inline constexpr int kSchemaVersion = 2;

class Store {
 public:
  // ":memory:" opens a private in-memory database.
  explicit Store(const std::filesystem::path& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  class Transaction {
   public:
    Transaction(Transaction&& other) noexcept;
    Transaction& operator=(Transaction&&) = delete;
    ~Transaction();
    void commit();
    void rollback();

   private:
    friend class Store;
    explicit Transaction(Store& store);
    Store* store_;
    std::unique_lock<std::recursive_mutex> lock_;
    int depth_ = 0;
    bool open_ = false;
  };

  Transaction begin();

  template <class F>
  decltype(auto) atomically(F&& f) {
    auto tx = begin();
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
      f();
      tx.commit();
    } else {
      auto result = f();
      tx.commit();
      return result;
    }
  }

  int schema_version();

  // series
  void upsert_series(const SeriesInfo& info);
  std::optional<SeriesInfo> series(const std::string& name);
  std::vector<SeriesInfo> all_series();

  // characters
  void insert_character(const Character& c);
  void update_character(const Character& c);
  void delete_character(const std::string& id);
  std::optional<Character> character(const std::string& id);
  std::vector<Character> characters(const std::string& series);
  // Rewrites every arc/progression reference from `from` to `to`.
  void replace_character_references(const std::string& from, const std::string& to);

  // episodes
  void upsert_episode(const EpisodeDoc& doc);
  std::optional<EpisodeDoc> episode(const EpisodeKey& key);
  std::vector<EpisodeDoc> episodes(const std::string& series, std::optional<int> season = {});
  void set_season_summary(const std::string& series, int season, const std::string& summary);
  std::optional<std::string> season_summary(const std::string& series, int season);

  // arcs and progressions
  void insert_arc(const NarrativeArc& arc);
  // Replaces title, description, type and main characters; progressions untouched.
  void update_arc(const NarrativeArc& arc);
  void delete_arc(const std::string& id);
  std::optional<NarrativeArc> arc(const std::string& id);
  std::vector<NarrativeArc> arcs(const std::string& series);
  // Arcs with at least one progression in the season.
  std::vector<NarrativeArc> arcs_in_season(const std::string& series, int season);
  void insert_progression(const Progression& p);
  void update_progression(const Progression& p);
  void delete_progression(const std::string& id);
  std::optional<Progression> progression(const std::string& id);
  // Moves remove's progressions onto keep, unions main characters and
  // deletes remove. Conflict on an episode collision or when the merged arc
  // would break an arc invariant (e.g. a multi-episode anthology).
  NarrativeArc merge_arcs(const std::string& keep, const std::string& remove);
  bool arc_exists(const std::string& id);
  bool progression_exists(const std::string& id);
  bool character_exists(const std::string& id);

  // embeddings
  void upsert_embedding(const ArcEmbedding& e);
  std::optional<ArcEmbedding> embedding(const std::string& arc_id);
  std::vector<ArcEmbedding> embeddings(const std::string& series);
  // Changes whenever stored embeddings may have changed (writes, rollbacks).
  std::uint64_t generation() const { return generation_.load(); }

  // audit, runs, dismissed suggestions
  void append_link_audit(const LinkAuditEntry& entry);
  std::vector<LinkAuditEntry> link_audit(const std::string& series);
  void put_run(const EpisodeKey& key, const Json& report);
  std::optional<Json> run(const EpisodeKey& key);
  bool processed(const EpisodeKey& key);
  void dismiss_pair(const std::string& series, const std::string& a, const std::string& b);
  std::set<std::pair<std::string, std::string>> dismissed_pairs(const std::string& series);

  // Per-season pipeline lock, persisted so separate processes see it.
  bool try_lock_season(const std::string& series, int season, const std::string& holder);
  void unlock_season(const std::string& series, int season, const std::string& holder);
  std::optional<SeasonLockInfo> season_lock(const std::string& series, int season);
  bool series_locked(const std::string& series);

  // Canonical export: sorted keys, entities sorted by id/key. An empty
  // `series` exports the whole database.
  Json export_json(const std::optional<std::string>& series = {});
  // Wipes the database and loads an export document.
  void import_json(const Json& doc);
  void wipe();

  // Dangling references and arc/character invariant violations, empty when clean.
  std::vector<std::string> integrity_violations();

  // Called with an operation label before every write; a throwing hook
  // aborts the write (fault injection in tests).
  void set_write_hook(std::function<void(std::string_view)> hook);

 private:
  void migrate();
  void before_write(std::string_view label);
  NarrativeArc load_arc_row(const std::string& id, const std::string& series,
                            const std::string& title, const std::string& description,
                            const std::string& type);
  void write_arc_characters(const NarrativeArc& arc);
  void write_progression(const Progression& p);
  void check_arc(const NarrativeArc& arc);
  std::unordered_set<std::string> character_ids(const std::string& series);

  sqlite3* db_ = nullptr;
  std::recursive_mutex mutex_;
  int depth_ = 0;
  std::atomic<std::uint64_t> generation_{0};
  std::function<void(std::string_view)> write_hook_;
};

}  // namespace arcweaver
