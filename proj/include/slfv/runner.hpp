#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "slfv/config.hpp"

namespace slfv {

inline constexpr std::string_view kVersion = "0.1.0";

struct RunOptions {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool resume = false;
  /// Work units per flushed chunk.
  std::size_t chunk = 64;
  /// Stop after this many chunks, leaving a resumable directory.
  std::optional<std::size_t> stop_after;
};

struct RunOutcome {
  bool complete = false;
  std::filesystem::path dir;
  std::size_t units = 0;
  std::size_t units_done = 0;
  std::size_t timeouts = 0;
};

/// Runs the experiment into `options.out`: results.csv, summary.json, side
/// files and manifest.json. Rows are appended chunk by chunk and progress.json
/// records how far the run got, so an interrupted run resumes where it stopped.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Writes a long-format CSV for one view of a finished artifact directory.
/// Views: survival, ks-trend, block-count, merger-hist. Throws
/// std::invalid_argument when the artifact kind does not provide the view.
void emit_plotdata(const std::filesystem::path& dir, std::string_view view, std::ostream& out);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace slfv
