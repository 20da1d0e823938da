#include "doctest.h"
#include "support.hpp"

using namespace arcweaver;
namespace t = arcweaver::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli_run(std::vector<std::string> args) {
  std::vector<const char*> argv{"arcweaver"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// The golden configuration rewritten with absolute paths into `dir`.
std::string write_config(const t::TempDir& dir) {
  auto path = (dir / "arcweaver.toml").string();
  std::ofstream(path) << "store = \"" << (dir / "store.db").string() << "\"\n"
                      << "prompts_dir = \"" << t::prompts_dir().string() << "\"\n"
                      << "runs_dir = \"" << (dir / "runs").string() << "\"\n"
                      << "[provider]\nkind = \"mock\"\n"
                      << "fixture = \"" << (t::golden_dir() / "script.json").string() << "\"\n"
                      << "embedding_dimension = 32\n";
  return path;
}

fs::path copy_series(const t::TempDir& dir) {
  auto target = dir / "series";
  fs::copy(t::golden_dir() / "series", target, fs::copy_options::recursive);
  return target;
}

}  // namespace

TEST_CASE("episode file names") {
  CHECK(cli::parse_episode_filename("S", "S01E02.txt") == EpisodeKey{"S", 1, 2});
  CHECK(cli::parse_episode_filename("S", "S12E103.txt") == EpisodeKey{"S", 12, 103});
  for (const char* bad : {"S1E1.txt", "s01e01.txt", "S01E01.md", "S00E01.txt", "S01E00.txt", "Pilot.txt", "S01E01.txt.txt"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(cli::parse_episode_filename("S", bad), Error);
  }
}

TEST_CASE("ingest adds, skips unchanged files and resets changed ones") {
  t::TempDir dir;
  auto series = copy_series(dir);
  Store store(":memory:");
  auto first = cli::ingest(series, store);
  CHECK(first.series == t::kSeries);
  CHECK(first.added == std::vector<std::string>{"S01E01", "S01E02", "S01E03"});
  auto again = cli::ingest(series, store);
  CHECK(again.added.empty());
  CHECK(again.updated.empty());
  CHECK(again.unchanged == 3);

  auto doc = *store.episode({t::kSeries, 1, 2});
  doc.simplified_plot = "derived";
  doc.normalized_plot = "derived";
  doc.episode_summary = "derived";
  store.upsert_episode(doc);
  std::ofstream(series / "S01E02.txt", std::ios::app) << "One more sentence.\n";
  auto changed = cli::ingest(series, store);
  CHECK(changed.updated == std::vector<std::string>{"S01E02"});
  auto fresh = *store.episode({t::kSeries, 1, 2});
  CHECK(fresh.raw_plot.find("One more sentence.") != std::string::npos);
  CHECK(fresh.simplified_plot.empty());
  CHECK(fresh.normalized_plot.empty());
  CHECK(fresh.episode_summary.empty());
  CHECK(store.integrity_violations().empty());
}

TEST_CASE("ingest rejects bad directories without writing") {
  Store store(":memory:");
  auto code = [&](const fs::path& p) {
    try {
      cli::ingest(p, store);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Injected;
  };
  {
    t::TempDir dir;
    auto series = copy_series(dir);
    fs::rename(series / "S01E03.txt", series / "S1E3.txt");
    CHECK(code(series) == ErrorCode::MalformedInput);
  }
  {
    t::TempDir dir;
    auto series = copy_series(dir);
    std::ofstream(series / "S01E04.txt") << "  \n\n";
    CHECK(code(series) == ErrorCode::MalformedInput);
  }
  {
    t::TempDir dir;
    auto series = copy_series(dir);
    fs::remove(series / "series.toml");
    CHECK(code(series) == ErrorCode::Config);
  }
  {
    t::TempDir dir;
    CHECK(code(dir / "nowhere") == ErrorCode::NotFound);
  }
  CHECK(store.all_series().empty());
  CHECK(store.episodes(t::kSeries).empty());
}

TEST_CASE("ingest refuses a series while a season is locked") {
  t::TempDir dir;
  auto series = copy_series(dir);
  Store store(":memory:");
  cli::ingest(series, store);
  REQUIRE(store.try_lock_season(t::kSeries, 1, "pipeline"));
  std::ofstream(series / "S01E04.txt") << "Nora Hale returns.\n";
  CHECK_THROWS_AS(cli::ingest(series, store), Error);
  CHECK_FALSE(store.episode({t::kSeries, 1, 4}));
}

TEST_CASE("the command line reproduces the golden export") {
  t::TempDir dir;
  auto config = write_config(dir);
  auto series = copy_series(dir);
  auto r = cli_run({"--config", config, "ingest", series.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  INFO(r.err);
  CHECK(Json::parse(r.out)["added"].size() == 3);

  r = cli_run({"--config", config, "run", t::kSeries, "--season", "1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("Precondition") != std::string::npos);

  r = cli_run({"--config", config, "preprocess", t::kSeries, "--season", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  // A mock script replays from its start in every process, so the season
  // is extracted by one invocation.
  r = cli_run({"--config", config, "run", t::kSeries, "--season", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(Json::parse(r.out).size() == 3);
  r = cli_run({"--config", config, "run", t::kSeries, "--season", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(Json::parse(r.out).empty());
  r = cli_run({"--config", config, "run", t::kSeries, "--season", "1", "--episode", "3"});
  CHECK(r.code == 1);
  CHECK(r.err.find("AlreadyProcessed") != std::string::npos);

  auto out = (dir / "export.json").string();
  r = cli_run({"--config", config, "export", t::kSeries, "-o", out});
  REQUIRE(r.code == 0);
  CHECK(t::slurp(out) == t::slurp(t::golden_dir() / "export.json"));
  r = cli_run({"--config", config, "export", t::kSeries});
  CHECK(r.out == t::slurp(t::golden_dir() / "export.json"));
}

TEST_CASE("evaluate prints the ratios") {
  t::TempDir dir;
  auto config = write_config(dir);
  auto eval = t::fixtures() / "eval";
  auto r = cli_run({"--config", config, "evaluate", (eval / "extracted.json").string(), (eval / "gold.json").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("Anthology precision: 25/28 = 0.893") != std::string::npos);
  CHECK(r.out.find("Character precision: 61/62 = 0.984") != std::string::npos);
  r = cli_run({"--config", config, "evaluate", (eval / "extracted.json").string(), (eval / "gold.json").string(),
               "--json"});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["characters"]["precision"]["numerator"] == 61);

  std::ofstream(dir / "bad.json") << R"({"arcs": [{"title": 1}]})";
  r = cli_run({"--config", config, "evaluate", (eval / "extracted.json").string(), (dir / "bad.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("MalformedInput") != std::string::npos);
}

TEST_CASE("exit codes") {
  t::TempDir dir;
  auto config = write_config(dir);
  CHECK(cli_run({}).code == 2);
  CHECK(cli_run({"frobnicate"}).code == 2);
  CHECK(cli_run({"--config", config, "run", t::kSeries}).code == 2);  // --season is required
  CHECK(cli_run({"--config", config, "run", t::kSeries, "--season", "0"}).code == 2);
  CHECK(cli_run({"--config", (dir / "missing.toml").string(), "export", t::kSeries}).code == 2);
  CHECK(cli_run({"--help"}).code == 0);

  auto r = cli_run({"--config", config, "export", "Nobody"});
  CHECK(r.code == 0);
  auto doc = Json::parse(r.out);
  CHECK(doc["schema_version"] == kSchemaVersion);
  CHECK(doc["arcs"].empty());
}
