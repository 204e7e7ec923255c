#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "slfv/event_model.hpp"
#include "slfv/rng.hpp"
#include "slfv/torus.hpp"

namespace slfv {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct Block {
  std::vector<int> members;  // sorted sample indices (0-based)
  TorusPoint label;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Partition of the sample indices {0..n-1} whose blocks carry torus labels.
class LabelledPartition {
 public:
  LabelledPartition() = default;
  LabelledPartition(std::vector<Block> blocks, std::size_t sample_size);

  static LabelledPartition singletons(std::span<const TorusPoint> labels);

  std::size_t sample_size() const { return n_; }
  std::size_t size() const { return blocks_.size(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& operator[](std::size_t i) const { return blocks_[i]; }

  void relabel(std::size_t block, TorusPoint label) { blocks_[block].label = label; }

  /// Merges the listed blocks (indices into blocks()) into one block carrying
  /// `label`. The merged block takes the position of the smallest index.
  void merge(std::span<const std::size_t> which, TorusPoint label);

  /// Throws std::logic_error unless blocks are non-empty, pairwise disjoint,
  /// cover {0..n-1}, and every label is canonical on `torus`.
  void validate(const TorusSpec& torus) const;

  /// Same partition with blocks ordered by smallest member.
  LabelledPartition canonical() const;

  friend bool operator==(const LabelledPartition&, const LabelledPartition&) = default;

 private:
  std::vector<Block> blocks_;
  std::size_t n_ = 0;
};

/// A Poisson event of the drive that affected at least one block. Replaying a
/// list of these on any labelled partition reproduces the dynamics exactly:
/// coverage is decided by distance, and the coin of each covered block is a
/// hash of (key, label).
struct DriveEvent {
  double time = 0.0;
  EventScale scale = EventScale::small;
  double base_radius = 0.0;  // radius before the psi scaling
  double radius = 0.0;       // radius on the torus
  TorusPoint center;
  double impact = 0.0;
  TorusPoint landing;
  std::uint64_t key = 0;
};

struct MergeEvent {
  double time = 0.0;
  EventScale scale = EventScale::small;
  double radius = 0.0;
  std::vector<std::vector<int>> merged;  // member sets of the affected blocks, sorted
  TorusPoint label;                      // label of the resulting block
};

/// Everything recorded along one trajectory of the dual.
struct GenealogyRecord {
  double sidelength = 0.0;
  std::size_t n = 0;
  std::vector<TorusPoint> initial_labels;
  std::vector<MergeEvent> events;
  LabelledPartition final_state;
  double end_time = 0.0;
  bool reached_mrca = false;
  std::uint64_t candidate_events = 0;
  std::uint64_t accepted_events = 0;

  /// Indexed by pair_index(n, i, j); kNever when the pair did not coalesce.
  std::vector<double> coalescence_times;
  std::vector<double> gathering_thresholds;
  /// [threshold][pair]: first time the two lineages were closer than the threshold.
  std::vector<std::vector<double>> gathering_times;

  /// Parallel to `events` when drive recording is enabled.
  std::vector<DriveEvent> drive;

  double coalescence_time(int i, int j) const;
  double gathering_time(std::size_t threshold, int i, int j) const;
};

std::size_t pair_count(std::size_t n);
std::size_t pair_index(std::size_t n, int i, int j);

/// Exact structural equality: initial state, merge events, final partition
/// and pair times.
bool structurally_equal(const GenealogyRecord& a, const GenealogyRecord& b);

enum class Placement { explicit_points, uniform, well_separated };

struct SampleConfig {
  std::size_t n = 2;
  Placement placement = Placement::well_separated;
  std::vector<TorusPoint> points;
};

/// L / log L, the minimal pairwise distance of a well-separated sample.
double well_separated_distance(const TorusSpec& torus);
bool is_well_separated(std::span<const TorusPoint> points, const TorusSpec& torus);

/// Draws the initial labels. Well-separated samples are drawn uniformly and
/// rejected until pairwise distances reach L/log L; infeasible requests throw.
std::vector<TorusPoint> place_sample(const SampleConfig& sample, const TorusSpec& torus, Rng& rng);

struct Candidate {
  double wait = 0.0;
  EventScale scale = EventScale::small;
  double base_radius = 0.0;
  double radius = 0.0;
  TorusPoint center;
  int coverage = 0;
  bool accepted = false;
};

/// Thinning sampler for the events of the drive that cover at least one
/// label. Each block proposes events centred uniformly in its own ball at rate
/// integral of V(r_eff) mu(dr) / divisor; a candidate covering c labels is
/// kept with probability 1/c.
class EventDriver {
 public:
  EventDriver(const EventLaw& law, const TorusSpec& torus);

  const EventLaw& law() const { return law_; }
  const TorusSpec& torus() const { return torus_; }
  /// Candidate rate contributed by one block.
  double per_block_rate() const;
  double class_rate(EventScale scale) const;

  Candidate propose(std::span<const Block> blocks, Rng& rng) const;
  /// A candidate for a single label (always accepted).
  Candidate propose_single(TorusPoint label, Rng& rng) const;

  double sample_impact(const Candidate& c, Rng& rng) const {
    return law_.cls(c.scale).impact.at(c.base_radius).sample(rng);
  }

 private:
  struct ClassSampler {
    EventScale scale = EventScale::small;
    double rate = 0.0;  // per block
    double atom_rate = 0.0;
    std::vector<double> atom_cumulative;
    std::vector<double> atom_radius;
    double density_rate = 0.0;
    std::vector<double> segment_cumulative;
  };

  ClassSampler build(EventScale scale) const;
  double weight(EventScale scale, double base_radius) const;
  double sample_radius(const ClassSampler& s, Rng& rng) const;
  const ClassSampler& pick(Rng& rng) const;
  Candidate propose_around(TorusPoint label, Rng& rng) const;

  EventLaw law_;
  TorusSpec torus_;
  ClassSampler small_;
  ClassSampler large_;
};

/// One thinning step for the given state (convenience wrapper that builds
/// the driver on every call).
Candidate next_event(const LabelledPartition& state, const EventLaw& law,
                     const TorusSpec& torus, Rng& rng);

struct SimulationOptions {
  double horizon = kNever;
  bool until_mrca = true;
  std::uint64_t max_events = 1'000'000'000;
  /// Empty means 2 R^s and, when large events are active, 2 psi R^B.
  std::vector<double> gathering_thresholds;
  bool stop_when_gathered = false;  // all pairs below the first threshold
  bool stop_on_first_merger = false;
  bool track_pairs = true;
  bool record_drive = false;
  /// Labels never move and blocks never merge; affected sets are still recorded.
  bool frozen = false;
  /// Redraw every label uniformly on the torus before each candidate event.
  bool homogenize = false;
  /// Snap landing labels to the centres of a G x G grid of cells.
  std::optional<int> snap_grid;
};

std::vector<double> default_gathering_thresholds(const EventLaw& law);

/// Runs the dual until the MRCA (when until_mrca), the horizon, or a stop
/// condition. Throws SimulationTimeout when max_events candidates are
/// exceeded, or up front when the MRCA is requested with an infinite horizon
/// and the law never moves a lineage.
GenealogyRecord simulate_genealogy(std::span<const TorusPoint> initial, const EventLaw& law,
                                   const TorusSpec& torus, const SimulationOptions& options,
                                   Rng& rng);

GenealogyRecord simulate_genealogy(const SampleConfig& sample, const EventLaw& law,
                                   const TorusSpec& torus, const SimulationOptions& options,
                                   Rng& rng);

/// Applies recorded drive events, in order, to a fresh sample. Gathering
/// thresholds are taken from options.gathering_thresholds only.
GenealogyRecord replay(std::span<const TorusPoint> initial, std::span<const DriveEvent> drive,
                       const TorusSpec& torus, const SimulationOptions& options);

/// The record induced on a subsample (indices renumbered in increasing order).
GenealogyRecord restrict(const GenealogyRecord& record, std::span<const int> subsample);

/// Times divided by time_factor, labels and radii multiplied by space_factor.
GenealogyRecord rescale_time_and_space(const GenealogyRecord& record, double time_factor,
                                       double space_factor);

/// Centre of the grid cell containing p.
TorusPoint snap_to_grid(TorusPoint p, const TorusSpec& torus, int grid);

struct EntranceResult {
  double time = kNever;
  bool entered = false;
  std::uint64_t jumps = 0;
};

/// First entrance of a single lineage into the closed ball B(0, radius),
/// observed up to `horizon`.
EntranceResult first_entrance(const EventDriver& driver, TorusPoint start, double radius,
                              double horizon, Rng& rng);

/// Position of a single lineage at time t.
TorusPoint lineage_position(const EventDriver& driver, TorusPoint start, double t, Rng& rng);

/// JSON lines: a header, one line per merge event, and a final line.
void write_event_log(std::ostream& out, const GenealogyRecord& record);
GenealogyRecord read_event_log(std::istream& in);

}  // namespace slfv
