#include "arcweaver/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "CLI11.hpp"

#include "arcweaver/api/service.hpp"
#include "arcweaver/config/config.hpp"
#include "arcweaver/core/error.hpp"
#include "arcweaver/evaluation/evaluate.hpp"

namespace arcweaver::cli {
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& p) {
  try {
    return Json::parse(read_file(p));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::MalformedInput, p.string() + ": " + e.what());
  }
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

EpisodeKey parse_episode_filename(const std::string& series, const std::string& filename) {
  static const std::regex pattern(R"(S(\d+)E(\d+)\.txt)");
  std::smatch m;
  if (std::regex_match(filename, m, pattern)) {
    EpisodeKey key{series, std::stoi(m[1]), std::stoi(m[2])};
    if (key.season >= 1 && key.episode >= 1 && key.code() + ".txt" == filename) return key;
  }
  fail(ErrorCode::MalformedInput,
       "episode file " + filename + " does not follow the S{season:02}E{episode:02}.txt naming");
}

IngestReport ingest(const fs::path& dir, Store& store) {
  if (!fs::is_directory(dir)) fail(ErrorCode::NotFound, "series directory " + dir.string());
  const auto info = read_series_file(dir / "series.toml");
  IngestReport report{info.name, {}, {}, 0};

  std::vector<std::pair<EpisodeKey, std::string>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    const auto name = entry.path().filename().string();
    auto key = parse_episode_filename(info.name, name);
    auto text = read_file(entry.path());
    if (blank(text)) fail(ErrorCode::MalformedInput, "episode file " + name + " is empty");
    files.emplace_back(key, std::move(text));
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  store.atomically([&] {
    if (store.series_locked(info.name)) {
      fail(ErrorCode::Conflict, "a pipeline run holds a season lock on " + info.name);
    }
    auto existing = store.series(info.name);
    if (!existing || existing->genre != info.genre) store.upsert_series(info);
    for (const auto& [key, text] : files) {
      auto doc = store.episode(key);
      if (doc && doc->raw_plot == text) {
        ++report.unchanged;
        continue;
      }
      (doc ? report.updated : report.added).push_back(key.code());
      store.upsert_episode(EpisodeDoc{key, text, {}, {}, {}});
    }
  });
  return report;
}

namespace {

struct Options {
  std::string config;
  std::string dir;
  std::string series;
  int season = 0;
  int episode = 0;
  std::string out_path;
  std::string export_path;
  std::string gold_path;
  double threshold = 0.80;
  bool json = false;
  std::string listen;
};

Json ingest_json(const IngestReport& r) {
  return {{"series", r.series}, {"added", r.added}, {"updated", r.updated}, {"unchanged", r.unchanged}};
}

int dispatch(CLI::App& app, const Options& o, std::ostream& out) {
  std::optional<fs::path> config_file;
  if (!o.config.empty()) config_file = o.config;
  Engine engine(load_config(config_file));

  if (app.got_subcommand("ingest")) {
    out << ingest_json(ingest(o.dir, engine.store)).dump(2) << "\n";
  } else if (app.got_subcommand("preprocess")) {
    auto r = preprocess::preprocess_season(o.series, o.season, engine.store, engine.preprocessor, engine.gateway,
                                           engine.prompts, engine.ids);
    out << Json{{"episodes", r.episodes},
                {"skipped", r.skipped},
                {"characters_changed", r.characters_changed},
                {"season_summary_built", r.season_summary_built}}
               .dump(2)
        << "\n";
  } else if (app.got_subcommand("run")) {
    Json reports = Json::array();
    if (o.episode > 0) {
      reports.push_back(engine.pipeline.run_episode({o.series, o.season, o.episode}));
    } else {
      for (auto& r : pipeline::run_season(engine.pipeline, engine.store, o.series, o.season)) reports.push_back(r);
    }
    out << reports.dump(2) << "\n";
  } else if (app.got_subcommand("export")) {
    const auto text = engine.store.export_json(o.series).dump(2) + "\n";
    if (o.out_path.empty() || o.out_path == "-") {
      out << text;
    } else {
      std::ofstream f(o.out_path, std::ios::binary);
      if (!f) fail(ErrorCode::Precondition, "cannot write " + o.out_path);
      f << text;
    }
  } else if (app.got_subcommand("evaluate")) {
    auto gold = evaluation::GoldAnnotations::from_json(read_json(o.gold_path));
    auto report = evaluation::evaluate(read_json(o.export_path), gold, engine.gateway, o.threshold);
    out << (o.json ? report.to_json().dump(2) + "\n" : report.to_text());
  } else if (app.got_subcommand("serve")) {
    std::string host = engine.config.listen_host;
    int port = engine.config.listen_port;
    if (!o.listen.empty()) {
      auto colon = o.listen.rfind(':');
      if (colon == std::string::npos) fail(ErrorCode::Config, "--listen expects host:port");
      host = o.listen.substr(0, colon);
      try {
        port = std::stoi(o.listen.substr(colon + 1));
      } catch (const std::exception&) {
        fail(ErrorCode::Config, "--listen expects host:port");
      }
    }
    api::ApiService service(engine);
    out << "listening on http://" << host << ":" << port << std::endl;
    if (!service.listen(host, port)) fail(ErrorCode::Config, "cannot bind " + host + ":" + std::to_string(port));
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Narrative arc extraction from episode summaries", "arcweaver"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Configuration file (TOML)");

  auto* ingest_cmd = app.add_subcommand("ingest", "Register the episode texts of a series directory");
  ingest_cmd->add_option("dir", o.dir, "Series directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Preprocess a season and build its summary");
  pre->add_option("series", o.series)->required();
  pre->add_option("--season", o.season)->required()->check(CLI::PositiveNumber);

  auto* run_cmd = app.add_subcommand("run", "Extract arcs for a season, or one episode");
  run_cmd->add_option("series", o.series)->required();
  run_cmd->add_option("--season", o.season)->required()->check(CLI::PositiveNumber);
  run_cmd->add_option("--episode", o.episode)->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export", "Write the canonical JSON export");
  exp->add_option("series", o.series)->required();
  exp->add_option("-o,--out", o.out_path, "Output file (default stdout)");

  auto* eval = app.add_subcommand("evaluate", "Score an export against gold annotations");
  eval->add_option("export", o.export_path)->required();
  eval->add_option("gold", o.gold_path)->required();
  eval->add_option("--threshold", o.threshold, "Arc match cosine threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--json", o.json);

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--listen", o.listen, "host:port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    return dispatch(app, o, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::Config ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace arcweaver::cli
