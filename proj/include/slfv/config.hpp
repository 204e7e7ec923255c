#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "slfv/coalescent.hpp"
#include "slfv/event_model.hpp"
#include "slfv/stats.hpp"

namespace slfv {

/// A value in the key-value tree: number, boolean, string or (nested) list.
struct ConfigValue {
  std::variant<double, bool, std::string, std::vector<ConfigValue>> data;
  int line = 0;
};

/// section name ("" for the top level) -> key -> value.
using ConfigTree = std::map<std::string, std::map<std::string, ConfigValue>>;

/// Parses the text grammar; throws ConfigError listing every malformed line.
ConfigTree parse_config_tree(std::string_view text);

enum class ExperimentKind {
  genealogy,
  pair_time,
  block_count,
  first_merger,
  hitting_time,
  short_window,
  duality,
  forward_run,
  limit_sample
};

std::string_view to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_kind(std::string_view name);

enum class FieldInit { monomorphic, uniform, checkerboard };
enum class LimitProcess { kingman, lambda, spatial };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::pair_time;
  std::string text;  // source, hashed into the manifest
  std::uint64_t seed = 0;
  std::size_t replicates = 0;
  std::optional<unsigned> threads;
  std::optional<std::string> out;

  EventClass small;
  std::optional<EventClass> large;
  RegimeSpec regime;
  std::optional<Classification> classification;

  std::vector<double> ls;
  SampleConfig sample;
  double horizon = kNever;
  bool event_logs = true;

  std::vector<double> times;  // block-count, in units of phi

  double c = 1.0;    // first-merger, limit-sample
  double rho = 0.0;  // first-merger

  PowerLaw target;        // hitting-time
  double window_radius = 0.0;  // short-window
  PowerLaw window_end;
  PowerLaw window_length;

  int grid = 0;  // duality, forward-run
  int types = 2;
  FieldInit init = FieldInit::checkerboard;
  int init_type = 0;
  int square_cells = 1;
  std::vector<TorusPoint> points;
  std::vector<std::vector<int>> patterns;
  double time = 0.0;

  LimitProcess process = LimitProcess::kingman;
  double beta = 0.0;
  double b = 0.0;
  double sigma_s2 = 0.0;

  /// Law on T(L) for the first entry of `ls`, or a given L.
  EventLaw law(double L) const;
};

/// Parses and validates; throws ConfigError with every problem found.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace slfv
