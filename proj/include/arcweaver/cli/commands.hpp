#pragma once
// Batch driver behind the `arcweaver` executable.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "arcweaver/persistence/store.hpp"

namespace arcweaver::cli {

struct IngestReport {
  std::string series;
  std::vector<std::string> added;
  std::vector<std::string> updated;
  std::size_t unchanged = 0;
};

// Reads series.toml and every S{NN}E{NN}.txt of `dir`. Unchanged files are
// left alone; a changed file replaces raw_plot and clears derived text.
// Throws MalformedInput for a badly named .txt file or an empty one.
IngestReport ingest(const std::filesystem::path& dir, Store& store);

// Parses "S01E02.txt"; throws MalformedInput naming the file otherwise.
EpisodeKey parse_episode_filename(const std::string& series, const std::string& filename);

// Exit codes: 0 ok, 1 domain error, 2 configuration or usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace arcweaver::cli
