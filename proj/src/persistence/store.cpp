#include "arcweaver/persistence/store.hpp"

#include <algorithm>
#include <cstring>
#include <map>

#include "sqlite.hpp"

namespace arcweaver {
namespace {

using sql::Statement;

// Forward-only migrations; index i upgrades version i to i + 1.
const std::vector<std::string>& migrations() {
  static const std::vector<std::string> steps = {
      R"sql(
CREATE TABLE series(
  name TEXT PRIMARY KEY,
  genre TEXT NOT NULL DEFAULT '');
CREATE TABLE characters(
  id TEXT PRIMARY KEY,
  series TEXT NOT NULL,
  preferred_name TEXT NOT NULL CHECK(preferred_name <> ''),
  preferred_key TEXT NOT NULL,
  UNIQUE(series, preferred_key));
CREATE TABLE character_names(
  character_id TEXT NOT NULL REFERENCES characters(id) ON DELETE CASCADE,
  name TEXT NOT NULL,
  PRIMARY KEY(character_id, name));
CREATE TABLE episodes(
  series TEXT NOT NULL,
  season INTEGER NOT NULL CHECK(season > 0),
  episode INTEGER NOT NULL CHECK(episode > 0),
  raw_plot TEXT NOT NULL,
  simplified_plot TEXT NOT NULL DEFAULT '',
  normalized_plot TEXT NOT NULL DEFAULT '',
  episode_summary TEXT NOT NULL DEFAULT '',
  CHECK(normalized_plot = '' OR simplified_plot <> ''),
  PRIMARY KEY(series, season, episode));
CREATE TABLE season_summaries(
  series TEXT NOT NULL,
  season INTEGER NOT NULL,
  summary TEXT NOT NULL,
  PRIMARY KEY(series, season));
CREATE TABLE arcs(
  id TEXT PRIMARY KEY,
  series TEXT NOT NULL,
  title TEXT NOT NULL CHECK(title <> ''),
  description TEXT NOT NULL CHECK(description <> ''),
  arc_type TEXT NOT NULL CHECK(arc_type IN ('Anthology', 'Soap', 'GenreSpecific')));
CREATE TABLE arc_main_characters(
  arc_id TEXT NOT NULL REFERENCES arcs(id) ON DELETE CASCADE,
  character_id TEXT NOT NULL REFERENCES characters(id),
  PRIMARY KEY(arc_id, character_id));
CREATE TABLE progressions(
  id TEXT PRIMARY KEY,
  arc_id TEXT NOT NULL REFERENCES arcs(id) ON DELETE CASCADE,
  series TEXT NOT NULL,
  season INTEGER NOT NULL CHECK(season > 0),
  episode INTEGER NOT NULL CHECK(episode > 0),
  content TEXT NOT NULL CHECK(content <> ''),
  UNIQUE(arc_id, season, episode));
CREATE TABLE progression_characters(
  progression_id TEXT NOT NULL REFERENCES progressions(id) ON DELETE CASCADE,
  character_id TEXT NOT NULL REFERENCES characters(id),
  PRIMARY KEY(progression_id, character_id));
CREATE TABLE embeddings(
  arc_id TEXT PRIMARY KEY REFERENCES arcs(id) ON DELETE CASCADE,
  dimension INTEGER NOT NULL CHECK(dimension > 0),
  vector BLOB NOT NULL,
  source_text TEXT NOT NULL);
CREATE TABLE link_audit(
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  series TEXT NOT NULL,
  new_arc_id TEXT NOT NULL,
  new_arc_title TEXT NOT NULL,
  candidate_arc_id TEXT NOT NULL,
  verdict TEXT NOT NULL CHECK(verdict IN ('SameStoryline', 'Distinct')),
  rationale TEXT NOT NULL,
  score REAL NOT NULL,
  final_arc_id TEXT NOT NULL);
CREATE TABLE runs(
  series TEXT NOT NULL,
  season INTEGER NOT NULL,
  episode INTEGER NOT NULL,
  report TEXT NOT NULL,
  PRIMARY KEY(series, season, episode));
CREATE TABLE season_locks(
  series TEXT NOT NULL,
  season INTEGER NOT NULL,
  holder TEXT NOT NULL,
  PRIMARY KEY(series, season));
)sql",
      R"sql(
CREATE TABLE dismissed_pairs(
  series TEXT NOT NULL,
  first_id TEXT NOT NULL,
  second_id TEXT NOT NULL,
  PRIMARY KEY(series, first_id, second_id));
CREATE INDEX progressions_by_episode ON progressions(series, season, episode);
CREATE INDEX arcs_by_series ON arcs(series);
)sql",
  };
  return steps;
}

std::vector<std::byte> to_blob(const std::vector<float>& values) {
  std::vector<std::byte> out(values.size() * sizeof(float));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<float> from_blob(const std::vector<std::byte>& bytes) {
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(float));
  return out;
}

std::pair<std::string, std::string> ordered_pair(const std::string& a, const std::string& b) {
  return a < b ? std::pair(a, b) : std::pair(b, a);
}

Json link_audit_json(const LinkAuditEntry& e) {
  return {{"series", e.series},
          {"new_arc_id", e.new_arc_id},
          {"new_arc_title", e.new_arc_title},
          {"candidate_arc_id", e.candidate_arc_id},
          {"verdict", e.verdict},
          {"rationale", e.rationale},
          {"score", e.score},
          {"final_arc_id", e.final_arc_id}};
}

LinkAuditEntry link_audit_from(const Json& j) {
  LinkAuditEntry e;
  j.at("series").get_to(e.series);
  j.at("new_arc_id").get_to(e.new_arc_id);
  j.at("new_arc_title").get_to(e.new_arc_title);
  j.at("candidate_arc_id").get_to(e.candidate_arc_id);
  j.at("verdict").get_to(e.verdict);
  j.at("rationale").get_to(e.rationale);
  j.at("score").get_to(e.score);
  j.at("final_arc_id").get_to(e.final_arc_id);
  return e;
}

}  // namespace

// --- lifecycle ---------------------------------------------------------------

Store::Store(const std::filesystem::path& path) {
  int rc = sqlite3_open_v2(path.string().c_str(), &db_,
                           SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                           nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
    sqlite3_close(db_);
    db_ = nullptr;
    fail(ErrorCode::Config, "cannot open store " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  sql::exec(db_, "PRAGMA foreign_keys = ON;");
  if (path != ":memory:") sql::exec(db_, "PRAGMA journal_mode = WAL;");
  migrate();
}

Store::~Store() { sqlite3_close(db_); }

void Store::migrate() {
  std::lock_guard lock(mutex_);
  int version = schema_version();
  if (version > kSchemaVersion) {
    fail(ErrorCode::Config, "store schema version " + std::to_string(version) +
                                " is newer than this build (" + std::to_string(kSchemaVersion) + ")");
  }
  const auto& steps = migrations();
  for (int v = version; v < static_cast<int>(steps.size()); ++v) {
    auto tx = begin();
    sql::exec(db_, steps[static_cast<std::size_t>(v)]);
    sql::exec(db_, "PRAGMA user_version = " + std::to_string(v + 1) + ";");
    tx.commit();
  }
}

int Store::schema_version() {
  std::lock_guard lock(mutex_);
  Statement st(db_, "PRAGMA user_version;");
  return st.step() ? static_cast<int>(st.integer(0)) : 0;
}

void Store::set_write_hook(std::function<void(std::string_view)> hook) {
  std::lock_guard lock(mutex_);
  write_hook_ = std::move(hook);
}

void Store::before_write(std::string_view label) {
  if (write_hook_) write_hook_(label);
}

// --- transactions ------------------------------------------------------------

Store::Transaction::Transaction(Store& store) : store_(&store), lock_(store.mutex_) {
  depth_ = store_->depth_;
  if (depth_ == 0) {
    sql::exec(store_->db_, "BEGIN IMMEDIATE;");
  } else {
    sql::exec(store_->db_, "SAVEPOINT sp" + std::to_string(depth_) + ";");
  }
  ++store_->depth_;
  open_ = true;
}

Store::Transaction::Transaction(Transaction&& other) noexcept
    : store_(other.store_), lock_(std::move(other.lock_)), depth_(other.depth_), open_(other.open_) {
  other.open_ = false;
}

Store::Transaction::~Transaction() {
  if (open_) {
    try {
      rollback();
    } catch (...) {
    }
  }
}

void Store::Transaction::commit() {
  if (!open_) return;
  if (depth_ == 0) {
    sql::exec(store_->db_, "COMMIT;");
  } else {
    sql::exec(store_->db_, "RELEASE sp" + std::to_string(depth_) + ";");
  }
  --store_->depth_;
  open_ = false;
}

void Store::Transaction::rollback() {
  if (!open_) return;
  open_ = false;
  --store_->depth_;
  ++store_->generation_;
  if (depth_ == 0) {
    sql::exec(store_->db_, "ROLLBACK;");
  } else {
    std::string sp = "sp" + std::to_string(depth_);
    sql::exec(store_->db_, "ROLLBACK TO " + sp + "; RELEASE " + sp + ";");
  }
}

Store::Transaction Store::begin() { return Transaction(*this); }

// --- series ------------------------------------------------------------------

void Store::upsert_series(const SeriesInfo& info) {
  require(!info.name.empty(), "series name must be non-empty");
  auto tx = begin();
  before_write("upsert_series");
  Statement(db_,
            "INSERT INTO series(name, genre) VALUES(?, ?) "
            "ON CONFLICT(name) DO UPDATE SET genre = excluded.genre;")
      .bind(1, info.name)
      .bind(2, info.genre)
      .run();
  tx.commit();
}

std::optional<SeriesInfo> Store::series(const std::string& name) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT name, genre FROM series WHERE name = ?;");
  st.bind(1, name);
  if (!st.step()) return std::nullopt;
  return SeriesInfo{st.text(0), st.text(1)};
}

std::vector<SeriesInfo> Store::all_series() {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT name, genre FROM series ORDER BY name;");
  std::vector<SeriesInfo> out;
  while (st.step()) out.push_back({st.text(0), st.text(1)});
  return out;
}

// --- characters --------------------------------------------------------------

void Store::insert_character(const Character& c) {
  require(!c.character_id.empty() && !c.preferred_name.empty() && !c.series.empty(),
          "character needs id, preferred name and series");
  if (c.alternative_names.contains(c.preferred_name)) {
    fail(ErrorCode::ConstraintViolation,
         "preferred name '" + c.preferred_name + "' listed among alternatives");
  }
  auto tx = begin();
  before_write("insert_character");
  Statement(db_,
            "INSERT INTO characters(id, series, preferred_name, preferred_key) VALUES(?, ?, ?, ?);")
      .bind(1, c.character_id)
      .bind(2, c.series)
      .bind(3, c.preferred_name)
      .bind(4, lowercase(c.preferred_name))
      .run();
  for (const auto& name : c.alternative_names) {
    Statement(db_, "INSERT INTO character_names(character_id, name) VALUES(?, ?);")
        .bind(1, c.character_id)
        .bind(2, name)
        .run();
  }
  tx.commit();
}

void Store::update_character(const Character& c) {
  if (c.alternative_names.contains(c.preferred_name)) {
    fail(ErrorCode::ConstraintViolation,
         "preferred name '" + c.preferred_name + "' listed among alternatives");
  }
  require(!c.preferred_name.empty(), "preferred name must be non-empty");
  auto tx = begin();
  auto existing = character(c.character_id);
  if (!existing) fail(ErrorCode::NotFound, "character " + c.character_id);
  before_write("update_character");
  Statement(db_, "UPDATE characters SET preferred_name = ?, preferred_key = ? WHERE id = ?;")
      .bind(1, c.preferred_name)
      .bind(2, lowercase(c.preferred_name))
      .bind(3, c.character_id)
      .run();
  Statement(db_, "DELETE FROM character_names WHERE character_id = ?;").bind(1, c.character_id).run();
  for (const auto& name : c.alternative_names) {
    Statement(db_, "INSERT INTO character_names(character_id, name) VALUES(?, ?);")
        .bind(1, c.character_id)
        .bind(2, name)
        .run();
  }
  tx.commit();
}

void Store::delete_character(const std::string& id) {
  auto tx = begin();
  if (!character_exists(id)) fail(ErrorCode::NotFound, "character " + id);
  before_write("delete_character");
  Statement(db_, "DELETE FROM characters WHERE id = ?;").bind(1, id).run();
  tx.commit();
}

bool Store::character_exists(const std::string& id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT 1 FROM characters WHERE id = ?;");
  st.bind(1, id);
  return st.step();
}

std::optional<Character> Store::character(const std::string& id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT id, preferred_name, series FROM characters WHERE id = ?;");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  Character c{st.text(0), st.text(1), {}, st.text(2)};
  Statement names(db_, "SELECT name FROM character_names WHERE character_id = ?;");
  names.bind(1, id);
  while (names.step()) c.alternative_names.insert(names.text(0));
  return c;
}

std::vector<Character> Store::characters(const std::string& series) {
  std::lock_guard lock(mutex_);
  std::map<std::string, Character> by_id;
  {
    Statement st(db_, "SELECT id, preferred_name, series FROM characters WHERE series = ?;");
    st.bind(1, series);
    while (st.step()) by_id.emplace(st.text(0), Character{st.text(0), st.text(1), {}, st.text(2)});
  }
  Statement names(db_,
                  "SELECT n.character_id, n.name FROM character_names n "
                  "JOIN characters c ON c.id = n.character_id WHERE c.series = ?;");
  names.bind(1, series);
  while (names.step()) by_id[names.text(0)].alternative_names.insert(names.text(1));
  std::vector<Character> out;
  out.reserve(by_id.size());
  for (auto& [id, c] : by_id) out.push_back(std::move(c));
  return out;
}

void Store::replace_character_references(const std::string& from, const std::string& to) {
  auto tx = begin();
  before_write("replace_character_references");
  Statement(db_,
            "INSERT OR IGNORE INTO arc_main_characters(arc_id, character_id) "
            "SELECT arc_id, ? FROM arc_main_characters WHERE character_id = ?;")
      .bind(1, to)
      .bind(2, from)
      .run();
  Statement(db_, "DELETE FROM arc_main_characters WHERE character_id = ?;").bind(1, from).run();
  Statement(db_,
            "INSERT OR IGNORE INTO progression_characters(progression_id, character_id) "
            "SELECT progression_id, ? FROM progression_characters WHERE character_id = ?;")
      .bind(1, to)
      .bind(2, from)
      .run();
  Statement(db_, "DELETE FROM progression_characters WHERE character_id = ?;").bind(1, from).run();
  tx.commit();
}

std::unordered_set<std::string> Store::character_ids(const std::string& series) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT id FROM characters WHERE series = ?;");
  st.bind(1, series);
  std::unordered_set<std::string> ids;
  while (st.step()) ids.insert(st.text(0));
  return ids;
}

// --- episodes ----------------------------------------------------------------

void Store::upsert_episode(const EpisodeDoc& d) {
  if (!d.normalized_plot.empty() && d.simplified_plot.empty()) {
    fail(ErrorCode::ConstraintViolation,
         "episode " + d.key.code() + ": normalized plot requires a simplified plot");
  }
  auto tx = begin();
  before_write("upsert_episode");
  Statement(db_,
            "INSERT INTO episodes(series, season, episode, raw_plot, simplified_plot, "
            "normalized_plot, episode_summary) VALUES(?, ?, ?, ?, ?, ?, ?) "
            "ON CONFLICT(series, season, episode) DO UPDATE SET raw_plot = excluded.raw_plot, "
            "simplified_plot = excluded.simplified_plot, normalized_plot = excluded.normalized_plot, "
            "episode_summary = excluded.episode_summary;")
      .bind(1, d.key.series)
      .bind(2, d.key.season)
      .bind(3, d.key.episode)
      .bind(4, d.raw_plot)
      .bind(5, d.simplified_plot)
      .bind(6, d.normalized_plot)
      .bind(7, d.episode_summary)
      .run();
  tx.commit();
}

std::optional<EpisodeDoc> Store::episode(const EpisodeKey& key) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "SELECT raw_plot, simplified_plot, normalized_plot, episode_summary FROM episodes "
               "WHERE series = ? AND season = ? AND episode = ?;");
  st.bind(1, key.series).bind(2, key.season).bind(3, key.episode);
  if (!st.step()) return std::nullopt;
  return EpisodeDoc{key, st.text(0), st.text(1), st.text(2), st.text(3)};
}

std::vector<EpisodeDoc> Store::episodes(const std::string& series, std::optional<int> season) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "SELECT season, episode, raw_plot, simplified_plot, normalized_plot, episode_summary "
               "FROM episodes WHERE series = ? AND (? = 0 OR season = ?) ORDER BY season, episode;");
  st.bind(1, series).bind(2, season.value_or(0)).bind(3, season.value_or(0));
  std::vector<EpisodeDoc> out;
  while (st.step()) {
    out.push_back(EpisodeDoc{{series, static_cast<int>(st.integer(0)), static_cast<int>(st.integer(1))},
                             st.text(2), st.text(3), st.text(4), st.text(5)});
  }
  return out;
}

void Store::set_season_summary(const std::string& series, int season, const std::string& summary) {
  auto tx = begin();
  before_write("set_season_summary");
  Statement(db_,
            "INSERT INTO season_summaries(series, season, summary) VALUES(?, ?, ?) "
            "ON CONFLICT(series, season) DO UPDATE SET summary = excluded.summary;")
      .bind(1, series)
      .bind(2, season)
      .bind(3, summary)
      .run();
  tx.commit();
}

std::optional<std::string> Store::season_summary(const std::string& series, int season) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT summary FROM season_summaries WHERE series = ? AND season = ?;");
  st.bind(1, series).bind(2, season);
  if (!st.step()) return std::nullopt;
  return st.text(0);
}

// --- arcs ----------------------------------------------------------------------

void Store::check_arc(const NarrativeArc& arc) {
  auto report = validate_arc(arc, character_ids(arc.series));
  if (!report.ok()) {
    std::string codes;
    for (const auto& v : report.violations) codes += (codes.empty() ? "" : ", ") + v.code;
    ErrorCode code = report.has("anthology-multi-episode") || report.has("duplicate-episode-progression")
                         ? ErrorCode::Conflict
                         : ErrorCode::ConstraintViolation;
    fail(code, "arc '" + arc.title + "' violates invariants: " + codes);
  }
}

void Store::write_arc_characters(const NarrativeArc& arc) {
  Statement(db_, "DELETE FROM arc_main_characters WHERE arc_id = ?;").bind(1, arc.arc_id).run();
  for (const auto& id : arc.main_characters) {
    Statement(db_, "INSERT INTO arc_main_characters(arc_id, character_id) VALUES(?, ?);")
        .bind(1, arc.arc_id)
        .bind(2, id)
        .run();
  }
}

void Store::write_progression(const Progression& p) {
  Statement(db_,
            "INSERT INTO progressions(id, arc_id, series, season, episode, content) "
            "VALUES(?, ?, ?, ?, ?, ?);")
      .bind(1, p.progression_id)
      .bind(2, p.arc_id)
      .bind(3, p.series)
      .bind(4, p.season)
      .bind(5, p.episode)
      .bind(6, p.content)
      .run();
  for (const auto& id : p.interfering_characters) {
    Statement(db_, "INSERT INTO progression_characters(progression_id, character_id) VALUES(?, ?);")
        .bind(1, p.progression_id)
        .bind(2, id)
        .run();
  }
}

void Store::insert_arc(const NarrativeArc& input) {
  NarrativeArc arc = order_progressions(input);
  auto tx = begin();
  check_arc(arc);
  before_write("insert_arc");
  Statement(db_, "INSERT INTO arcs(id, series, title, description, arc_type) VALUES(?, ?, ?, ?, ?);")
      .bind(1, arc.arc_id)
      .bind(2, arc.series)
      .bind(3, arc.title)
      .bind(4, arc.description)
      .bind(5, to_string(arc.arc_type))
      .run();
  write_arc_characters(arc);
  for (const auto& p : arc.progressions) write_progression(p);
  tx.commit();
}

void Store::update_arc(const NarrativeArc& header) {
  auto tx = begin();
  auto current = arc(header.arc_id);
  if (!current) fail(ErrorCode::NotFound, "arc " + header.arc_id);
  NarrativeArc updated = *current;
  updated.title = header.title;
  updated.description = header.description;
  updated.arc_type = header.arc_type;
  updated.main_characters = header.main_characters;
  check_arc(updated);
  before_write("update_arc");
  Statement(db_, "UPDATE arcs SET title = ?, description = ?, arc_type = ? WHERE id = ?;")
      .bind(1, updated.title)
      .bind(2, updated.description)
      .bind(3, to_string(updated.arc_type))
      .bind(4, updated.arc_id)
      .run();
  write_arc_characters(updated);
  tx.commit();
}

void Store::delete_arc(const std::string& id) {
  auto tx = begin();
  if (!arc_exists(id)) fail(ErrorCode::NotFound, "arc " + id);
  before_write("delete_arc");
  Statement(db_, "DELETE FROM arcs WHERE id = ?;").bind(1, id).run();
  ++generation_;
  tx.commit();
}

bool Store::arc_exists(const std::string& id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT 1 FROM arcs WHERE id = ?;");
  st.bind(1, id);
  return st.step();
}

bool Store::progression_exists(const std::string& id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT 1 FROM progressions WHERE id = ?;");
  st.bind(1, id);
  return st.step();
}

NarrativeArc Store::load_arc_row(const std::string& id, const std::string& series,
                                 const std::string& title, const std::string& description,
                                 const std::string& type) {
  NarrativeArc a;
  a.arc_id = id;
  a.series = series;
  a.title = title;
  a.description = description;
  a.arc_type = parse_arc_type(type);
  {
    Statement st(db_, "SELECT character_id FROM arc_main_characters WHERE arc_id = ?;");
    st.bind(1, id);
    while (st.step()) a.main_characters.insert(st.text(0));
  }
  Statement st(db_,
               "SELECT id, series, season, episode, content FROM progressions WHERE arc_id = ? "
               "ORDER BY season, episode;");
  st.bind(1, id);
  while (st.step()) {
    Progression p;
    p.progression_id = st.text(0);
    p.arc_id = id;
    p.series = st.text(1);
    p.season = static_cast<int>(st.integer(2));
    p.episode = static_cast<int>(st.integer(3));
    p.content = st.text(4);
    Statement chars(db_, "SELECT character_id FROM progression_characters WHERE progression_id = ?;");
    chars.bind(1, p.progression_id);
    while (chars.step()) p.interfering_characters.insert(chars.text(0));
    a.progressions.push_back(std::move(p));
  }
  return a;
}

std::optional<NarrativeArc> Store::arc(const std::string& id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT id, series, title, description, arc_type FROM arcs WHERE id = ?;");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  return load_arc_row(st.text(0), st.text(1), st.text(2), st.text(3), st.text(4));
}

std::vector<NarrativeArc> Store::arcs(const std::string& series) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "SELECT id, series, title, description, arc_type FROM arcs WHERE series = ? ORDER BY id;");
  st.bind(1, series);
  std::vector<NarrativeArc> out;
  while (st.step()) out.push_back(load_arc_row(st.text(0), st.text(1), st.text(2), st.text(3), st.text(4)));
  return out;
}

std::vector<NarrativeArc> Store::arcs_in_season(const std::string& series, int season) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "SELECT id, series, title, description, arc_type FROM arcs WHERE series = ? AND id IN "
               "(SELECT arc_id FROM progressions WHERE series = ? AND season = ?) ORDER BY id;");
  st.bind(1, series).bind(2, series).bind(3, season);
  std::vector<NarrativeArc> out;
  while (st.step()) out.push_back(load_arc_row(st.text(0), st.text(1), st.text(2), st.text(3), st.text(4)));
  return out;
}

void Store::insert_progression(const Progression& p) {
  auto tx = begin();
  auto parent = arc(p.arc_id);
  if (!parent) fail(ErrorCode::NotFound, "arc " + p.arc_id);
  parent->progressions.push_back(p);
  check_arc(order_progressions(*parent));
  before_write("insert_progression");
  write_progression(p);
  tx.commit();
}

void Store::update_progression(const Progression& p) {
  auto tx = begin();
  auto current = progression(p.progression_id);
  if (!current) fail(ErrorCode::NotFound, "progression " + p.progression_id);
  auto parent = arc(current->arc_id);
  if (p.arc_id != current->arc_id) {
    fail(ErrorCode::ConstraintViolation, "progression cannot move to another arc");
  }
  for (auto& existing : parent->progressions) {
    if (existing.progression_id == p.progression_id) existing = p;
  }
  check_arc(order_progressions(*parent));
  before_write("update_progression");
  Statement(db_, "UPDATE progressions SET content = ?, season = ?, episode = ?, series = ? WHERE id = ?;")
      .bind(1, p.content)
      .bind(2, p.season)
      .bind(3, p.episode)
      .bind(4, p.series)
      .bind(5, p.progression_id)
      .run();
  Statement(db_, "DELETE FROM progression_characters WHERE progression_id = ?;")
      .bind(1, p.progression_id)
      .run();
  for (const auto& id : p.interfering_characters) {
    Statement(db_, "INSERT INTO progression_characters(progression_id, character_id) VALUES(?, ?);")
        .bind(1, p.progression_id)
        .bind(2, id)
        .run();
  }
  tx.commit();
}

void Store::delete_progression(const std::string& id) {
  auto tx = begin();
  if (!progression_exists(id)) fail(ErrorCode::NotFound, "progression " + id);
  before_write("delete_progression");
  Statement(db_, "DELETE FROM progressions WHERE id = ?;").bind(1, id).run();
  tx.commit();
}

std::optional<Progression> Store::progression(const std::string& id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT arc_id FROM progressions WHERE id = ?;");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  auto parent = arc(st.text(0));
  for (auto& p : parent->progressions) {
    if (p.progression_id == id) return p;
  }
  return std::nullopt;
}

NarrativeArc Store::merge_arcs(const std::string& keep_id, const std::string& remove_id) {
  if (keep_id == remove_id) fail(ErrorCode::SelfMerge, "cannot merge arc " + keep_id + " into itself");
  auto tx = begin();
  auto keep = arc(keep_id);
  auto remove = arc(remove_id);
  if (!keep) fail(ErrorCode::NotFound, "arc " + keep_id);
  if (!remove) fail(ErrorCode::NotFound, "arc " + remove_id);
  if (keep->series != remove->series) {
    fail(ErrorCode::Conflict, "arcs belong to different series");
  }
  for (const auto& p : remove->progressions) {
    for (const auto& q : keep->progressions) {
      if (p.season == q.season && p.episode == q.episode) {
        fail(ErrorCode::Conflict, "both arcs have a progression in " + p.key().code());
      }
    }
  }
  NarrativeArc merged = *keep;
  for (auto p : remove->progressions) {
    p.arc_id = keep_id;
    merged.progressions.push_back(std::move(p));
  }
  merged.main_characters.insert(remove->main_characters.begin(), remove->main_characters.end());
  merged = order_progressions(std::move(merged));
  check_arc(merged);

  before_write("merge_arcs");
  Statement(db_, "UPDATE progressions SET arc_id = ? WHERE arc_id = ?;")
      .bind(1, keep_id)
      .bind(2, remove_id)
      .run();
  write_arc_characters(merged);
  Statement(db_, "DELETE FROM arcs WHERE id = ?;").bind(1, remove_id).run();
  ++generation_;
  tx.commit();
  return merged;
}

// --- embeddings --------------------------------------------------------------

void Store::upsert_embedding(const ArcEmbedding& e) {
  require(e.vector.dimension() > 0, "embedding must have a positive dimension");
  auto tx = begin();
  if (!arc_exists(e.arc_id)) fail(ErrorCode::NotFound, "arc " + e.arc_id);
  {
    Statement st(db_, "SELECT dimension FROM embeddings WHERE arc_id <> ? LIMIT 1;");
    st.bind(1, e.arc_id);
    if (st.step() && static_cast<std::size_t>(st.integer(0)) != e.vector.dimension()) {
      fail(ErrorCode::DimensionMismatch, "store holds " + std::to_string(st.integer(0)) +
                                             "-dimensional embeddings, got " +
                                             std::to_string(e.vector.dimension()));
    }
  }
  before_write("upsert_embedding");
  Statement(db_,
            "INSERT INTO embeddings(arc_id, dimension, vector, source_text) VALUES(?, ?, ?, ?) "
            "ON CONFLICT(arc_id) DO UPDATE SET dimension = excluded.dimension, "
            "vector = excluded.vector, source_text = excluded.source_text;")
      .bind(1, e.arc_id)
      .bind(2, static_cast<std::int64_t>(e.vector.dimension()))
      .bind_blob(3, to_blob(e.vector.values))
      .bind(4, e.source_text)
      .run();
  ++generation_;
  tx.commit();
}

std::optional<ArcEmbedding> Store::embedding(const std::string& arc_id) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT vector, source_text FROM embeddings WHERE arc_id = ?;");
  st.bind(1, arc_id);
  if (!st.step()) return std::nullopt;
  return ArcEmbedding{arc_id, {from_blob(st.blob(0))}, st.text(1)};
}

std::vector<ArcEmbedding> Store::embeddings(const std::string& series) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "SELECT e.arc_id, e.vector, e.source_text FROM embeddings e JOIN arcs a ON a.id = e.arc_id "
               "WHERE a.series = ? ORDER BY e.arc_id;");
  st.bind(1, series);
  std::vector<ArcEmbedding> out;
  while (st.step()) out.push_back({st.text(0), {from_blob(st.blob(1))}, st.text(2)});
  return out;
}

// --- audit, runs, dismissals -------------------------------------------------

void Store::append_link_audit(const LinkAuditEntry& e) {
  auto tx = begin();
  before_write("append_link_audit");
  Statement(db_,
            "INSERT INTO link_audit(series, new_arc_id, new_arc_title, candidate_arc_id, verdict, "
            "rationale, score, final_arc_id) VALUES(?, ?, ?, ?, ?, ?, ?, ?);")
      .bind(1, e.series)
      .bind(2, e.new_arc_id)
      .bind(3, e.new_arc_title)
      .bind(4, e.candidate_arc_id)
      .bind(5, e.verdict)
      .bind(6, e.rationale)
      .bind(7, e.score)
      .bind(8, e.final_arc_id)
      .run();
  tx.commit();
}

std::vector<LinkAuditEntry> Store::link_audit(const std::string& series) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "SELECT series, new_arc_id, new_arc_title, candidate_arc_id, verdict, rationale, score, "
               "final_arc_id FROM link_audit WHERE series = ? ORDER BY seq;");
  st.bind(1, series);
  std::vector<LinkAuditEntry> out;
  while (st.step()) {
    out.push_back({st.text(0), st.text(1), st.text(2), st.text(3), st.text(4), st.text(5), st.real(6),
                   st.text(7)});
  }
  return out;
}

void Store::put_run(const EpisodeKey& key, const Json& report) {
  auto tx = begin();
  before_write("put_run");
  Statement(db_, "INSERT INTO runs(series, season, episode, report) VALUES(?, ?, ?, ?);")
      .bind(1, key.series)
      .bind(2, key.season)
      .bind(3, key.episode)
      .bind(4, report.dump())
      .run();
  tx.commit();
}

std::optional<Json> Store::run(const EpisodeKey& key) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT report FROM runs WHERE series = ? AND season = ? AND episode = ?;");
  st.bind(1, key.series).bind(2, key.season).bind(3, key.episode);
  if (!st.step()) return std::nullopt;
  return Json::parse(st.text(0));
}

bool Store::processed(const EpisodeKey& key) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT 1 FROM runs WHERE series = ? AND season = ? AND episode = ?;");
  st.bind(1, key.series).bind(2, key.season).bind(3, key.episode);
  return st.step();
}

void Store::dismiss_pair(const std::string& series, const std::string& a, const std::string& b) {
  auto [first, second] = ordered_pair(a, b);
  auto tx = begin();
  before_write("dismiss_pair");
  Statement(db_, "INSERT OR IGNORE INTO dismissed_pairs(series, first_id, second_id) VALUES(?, ?, ?);")
      .bind(1, series)
      .bind(2, first)
      .bind(3, second)
      .run();
  tx.commit();
}

std::set<std::pair<std::string, std::string>> Store::dismissed_pairs(const std::string& series) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT first_id, second_id FROM dismissed_pairs WHERE series = ?;");
  st.bind(1, series);
  std::set<std::pair<std::string, std::string>> out;
  while (st.step()) out.emplace(st.text(0), st.text(1));
  return out;
}

// --- season locks ------------------------------------------------------------

bool Store::try_lock_season(const std::string& series, int season, const std::string& holder) {
  auto tx = begin();
  Statement st(db_, "INSERT OR IGNORE INTO season_locks(series, season, holder) VALUES(?, ?, ?);");
  st.bind(1, series).bind(2, season).bind(3, holder).run();
  bool acquired = sqlite3_changes(db_) == 1;
  tx.commit();
  return acquired;
}

void Store::unlock_season(const std::string& series, int season, const std::string& holder) {
  auto tx = begin();
  Statement(db_, "DELETE FROM season_locks WHERE series = ? AND season = ? AND holder = ?;")
      .bind(1, series)
      .bind(2, season)
      .bind(3, holder)
      .run();
  tx.commit();
}

std::optional<SeasonLockInfo> Store::season_lock(const std::string& series, int season) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT holder FROM season_locks WHERE series = ? AND season = ?;");
  st.bind(1, series).bind(2, season);
  if (!st.step()) return std::nullopt;
  return SeasonLockInfo{series, season, st.text(0)};
}

bool Store::series_locked(const std::string& series) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT 1 FROM season_locks WHERE series = ? LIMIT 1;");
  st.bind(1, series);
  return st.step();
}

// --- export / import ---------------------------------------------------------

Json Store::export_json(const std::optional<std::string>& only) {
  auto tx = begin();  // consistent snapshot
  std::vector<SeriesInfo> names;
  if (only) {
    if (auto s = series(*only)) names.push_back(*s);
  } else {
    names = all_series();
  }

  Json doc = {{"schema_version", kSchemaVersion},
              {"series", Json::array()},
              {"characters", Json::array()},
              {"episodes", Json::array()},
              {"season_summaries", Json::array()},
              {"arcs", Json::array()},
              {"embeddings", Json::array()},
              {"link_audit", Json::array()},
              {"runs", Json::array()},
              {"dismissed_duplicates", Json::array()}};

  for (const auto& s : names) {
    doc["series"].push_back({{"name", s.name}, {"genre", s.genre}});
    for (const auto& c : characters(s.name)) doc["characters"].push_back(c);
    for (const auto& e : episodes(s.name)) {
      doc["episodes"].push_back(e);
      if (auto report = run(e.key)) {
        // import_json keys runs by these fields
        (*report)["series"] = e.key.series;
        (*report)["season"] = e.key.season;
        (*report)["episode"] = e.key.episode;
        doc["runs"].push_back(*report);
      }
    }
    {
      Statement st(db_, "SELECT season, summary FROM season_summaries WHERE series = ? ORDER BY season;");
      st.bind(1, s.name);
      while (st.step()) {
        doc["season_summaries"].push_back(
            {{"series", s.name}, {"season", st.integer(0)}, {"summary", st.text(1)}});
      }
    }
    for (const auto& a : arcs(s.name)) doc["arcs"].push_back(a);
    for (const auto& e : embeddings(s.name)) {
      doc["embeddings"].push_back(
          {{"arc_id", e.arc_id}, {"source_text", e.source_text}, {"vector", e.vector.values}});
    }
    for (const auto& e : link_audit(s.name)) doc["link_audit"].push_back(link_audit_json(e));
    for (const auto& [a, b] : dismissed_pairs(s.name)) {
      doc["dismissed_duplicates"].push_back({{"series", s.name}, {"first_id", a}, {"second_id", b}});
    }
  }
  tx.commit();
  return doc;
}

void Store::wipe() {
  auto tx = begin();
  before_write("wipe");
  sql::exec(db_,
            "DELETE FROM dismissed_pairs; DELETE FROM runs; DELETE FROM link_audit; "
            "DELETE FROM embeddings; DELETE FROM progression_characters; DELETE FROM progressions; "
            "DELETE FROM arc_main_characters; DELETE FROM arcs; DELETE FROM season_summaries; "
            "DELETE FROM episodes; DELETE FROM character_names; DELETE FROM characters; "
            "DELETE FROM series; DELETE FROM sqlite_sequence WHERE name = 'link_audit';");
  ++generation_;
  tx.commit();
}

void Store::import_json(const Json& doc) {
  int version = doc.value("schema_version", 0);
  if (version < 1 || version > kSchemaVersion) {
    fail(ErrorCode::MalformedInput, "unsupported export schema version " + std::to_string(version));
  }
  auto tx = begin();
  wipe();
  try {
    for (const auto& s : doc.at("series")) {
      upsert_series({s.at("name").get<std::string>(), s.value("genre", std::string{})});
    }
    for (const auto& c : doc.at("characters")) insert_character(c.get<Character>());
    for (const auto& e : doc.at("episodes")) upsert_episode(e.get<EpisodeDoc>());
    for (const auto& s : doc.at("season_summaries")) {
      set_season_summary(s.at("series").get<std::string>(), s.at("season").get<int>(),
                         s.at("summary").get<std::string>());
    }
    for (const auto& a : doc.at("arcs")) insert_arc(a.get<NarrativeArc>());
    for (const auto& e : doc.at("embeddings")) {
      upsert_embedding({e.at("arc_id").get<std::string>(),
                        {e.at("vector").get<std::vector<float>>()},
                        e.at("source_text").get<std::string>()});
    }
    for (const auto& e : doc.at("link_audit")) append_link_audit(link_audit_from(e));
    for (const auto& r : doc.at("runs")) {
      put_run({r.at("series").get<std::string>(), r.at("season").get<int>(),
               r.at("episode").get<int>()},
              r);
    }
    for (const auto& d : doc.value("dismissed_duplicates", Json::array())) {
      dismiss_pair(d.at("series").get<std::string>(), d.at("first_id").get<std::string>(),
                   d.at("second_id").get<std::string>());
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::MalformedInput, std::string("malformed export document: ") + e.what());
  }
  tx.commit();
}

// --- integrity ---------------------------------------------------------------

std::vector<std::string> Store::integrity_violations() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  auto sweep = [&](const char* label, const char* query) {
    Statement st(db_, query);
    while (st.step()) out.push_back(std::string(label) + ": " + st.text(0));
  };
  sweep("progression without arc",
        "SELECT id FROM progressions WHERE arc_id NOT IN (SELECT id FROM arcs);");
  sweep("main character reference dangling",
        "SELECT arc_id || ' -> ' || character_id FROM arc_main_characters "
        "WHERE character_id NOT IN (SELECT id FROM characters) OR arc_id NOT IN (SELECT id FROM arcs);");
  sweep("interfering character reference dangling",
        "SELECT progression_id || ' -> ' || character_id FROM progression_characters "
        "WHERE character_id NOT IN (SELECT id FROM characters) "
        "OR progression_id NOT IN (SELECT id FROM progressions);");
  sweep("embedding without arc", "SELECT arc_id FROM embeddings WHERE arc_id NOT IN (SELECT id FROM arcs);");
  sweep("cross-series character reference",
        "SELECT m.arc_id || ' -> ' || m.character_id FROM arc_main_characters m "
        "JOIN arcs a ON a.id = m.arc_id JOIN characters c ON c.id = m.character_id "
        "WHERE a.series <> c.series;");
  sweep("alternative name dangling",
        "SELECT name FROM character_names WHERE character_id NOT IN (SELECT id FROM characters);");

  for (const auto& s : all_series()) {
    auto registry = characters(s.name);
    for (const auto& v : validate_registry(registry).violations) {
      out.push_back("character invariant " + v.code + ": " + v.detail);
    }
    auto ids = character_ids(s.name);
    for (const auto& a : arcs(s.name)) {
      for (const auto& v : validate_arc(a, ids).violations) {
        out.push_back("arc " + a.arc_id + " " + v.code + ": " + v.detail);
      }
    }
  }
  return out;
}

}  // namespace arcweaver
