#pragma once
// Shared helpers for the unit and acceptance suites.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "arcweaver/cli/commands.hpp"
#include "arcweaver/config/config.hpp"
#include "arcweaver/core/error.hpp"

namespace arcweaver::testing {
namespace fs = std::filesystem;

inline const std::string kSeries = "Mercy Harbor";

inline fs::path fixtures() { return ARCWEAVER_FIXTURES_DIR; }
inline fs::path golden_dir() { return fixtures() / "golden"; }
inline fs::path prompts_dir() { return ARCWEAVER_TEST_PROMPTS; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("arcweaver-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// The golden fixture's configuration with the store and run reports moved
// into `dir`. The process environment is ignored.
inline Config golden_config(const fs::path& dir) {
  auto env = [dir](const std::string& name) -> std::optional<std::string> {
    if (name == "ARCWEAVER_STORE") return (dir / "store.db").string();
    if (name == "ARCWEAVER_RUNS") return (dir / "runs").string();
    return std::nullopt;
  };
  return load_config(golden_dir() / "arcweaver.toml", env);
}

inline void ingest_and_preprocess(Engine& e) {
  cli::ingest(golden_dir() / "series", e.store);
  preprocess::preprocess_season(kSeries, 1, e.store, e.preprocessor, e.gateway, e.prompts, e.ids);
}

// ingest, preprocess and extract the whole fixture season.
inline std::vector<Json> run_golden(Engine& e) {
  ingest_and_preprocess(e);
  return pipeline::run_season(e.pipeline, e.store, kSeries, 1);
}

inline std::string canonical_export(Store& store, const std::optional<std::string>& series = kSeries) {
  return store.export_json(series).dump(2) + "\n";
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "; ") + s;
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace arcweaver::testing
