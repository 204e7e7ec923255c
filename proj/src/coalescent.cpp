#include "slfv/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "slfv/errors.hpp"

namespace slfv {

// --- LabelledPartition ------------------------------------------------------

LabelledPartition::LabelledPartition(std::vector<Block> blocks, std::size_t sample_size)
    : blocks_(std::move(blocks)), n_(sample_size) {
  for (auto& b : blocks_) std::sort(b.members.begin(), b.members.end());
}

LabelledPartition LabelledPartition::singletons(std::span<const TorusPoint> labels) {
  std::vector<Block> blocks;
  blocks.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    blocks.push_back({{static_cast<int>(i)}, labels[i]});
  }
  return LabelledPartition(std::move(blocks), labels.size());
}

void LabelledPartition::merge(std::span<const std::size_t> which, TorusPoint label) {
  if (which.empty()) return;
  std::vector<std::size_t> idx(which.begin(), which.end());
  std::sort(idx.begin(), idx.end());
  Block& target = blocks_[idx.front()];
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const auto& m = blocks_[idx[k]].members;
    target.members.insert(target.members.end(), m.begin(), m.end());
  }
  std::sort(target.members.begin(), target.members.end());
  target.label = label;
  for (std::size_t k = idx.size(); k-- > 1;) {
    blocks_.erase(blocks_.begin() + static_cast<std::ptrdiff_t>(idx[k]));
  }
}

void LabelledPartition::validate(const TorusSpec& torus) const {
  std::vector<char> seen(n_, 0);
  for (const auto& b : blocks_) {
    if (b.members.empty()) throw std::logic_error("partition has an empty block");
    for (int m : b.members) {
      if (m < 0 || static_cast<std::size_t>(m) >= n_) {
        throw std::logic_error("block member " + std::to_string(m) + " out of range");
      }
      if (seen[m]) throw std::logic_error("index " + std::to_string(m) + " in two blocks");
      seen[m] = 1;
    }
    if (!torus.is_canonical(b.label)) throw std::logic_error("block label outside the torus");
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::logic_error("partition does not cover the sample");
  }
}

LabelledPartition LabelledPartition::canonical() const {
  LabelledPartition out = *this;
  std::sort(out.blocks_.begin(), out.blocks_.end(),
            [](const Block& a, const Block& b) { return a.members.front() < b.members.front(); });
  return out;
}

// --- records ------------------------------------------------------------------

std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

std::size_t pair_index(std::size_t n, int i, int j) {
  if (i == j || i < 0 || j < 0 || static_cast<std::size_t>(std::max(i, j)) >= n) {
    throw std::out_of_range("invalid pair of sample indices");
  }
  if (i > j) std::swap(i, j);
  const auto a = static_cast<std::size_t>(i);
  return a * n - a * (a + 1) / 2 + static_cast<std::size_t>(j - i - 1);
}

double GenealogyRecord::coalescence_time(int i, int j) const {
  return coalescence_times.at(pair_index(n, i, j));
}

double GenealogyRecord::gathering_time(std::size_t threshold, int i, int j) const {
  return gathering_times.at(threshold).at(pair_index(n, i, j));
}

bool structurally_equal(const GenealogyRecord& a, const GenealogyRecord& b) {
  if (a.n != b.n || a.sidelength != b.sidelength || a.initial_labels != b.initial_labels) {
    return false;
  }
  if (a.events.size() != b.events.size()) return false;
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    const auto& x = a.events[k];
    const auto& y = b.events[k];
    if (x.time != y.time || x.scale != y.scale || x.radius != y.radius || x.merged != y.merged ||
        x.label != y.label) {
      return false;
    }
  }
  return a.final_state.canonical() == b.final_state.canonical() &&
         a.coalescence_times == b.coalescence_times && a.gathering_times == b.gathering_times;
}

// --- sample placement -------------------------------------------------------------

double well_separated_distance(const TorusSpec& torus) {
  const double L = torus.sidelength();
  if (L <= std::exp(1.0)) throw std::invalid_argument("well-separated samples need L > e");
  return L / std::log(L);
}

bool is_well_separated(std::span<const TorusPoint> points, const TorusSpec& torus) {
  const double d2 = std::pow(well_separated_distance(torus), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (torus.distance_sq(points[i], points[j]) < d2) return false;
    }
  }
  return true;
}

std::vector<TorusPoint> place_sample(const SampleConfig& sample, const TorusSpec& torus,
                                     Rng& rng) {
  std::vector<TorusPoint> out;
  switch (sample.placement) {
    case Placement::explicit_points:
      if (sample.points.size() != sample.n) {
        throw std::invalid_argument("expected " + std::to_string(sample.n) + " sample points, got " +
                                    std::to_string(sample.points.size()));
      }
      for (const auto& p : sample.points) out.push_back(torus.canonical(p));
      return out;
    case Placement::uniform:
      for (std::size_t i = 0; i < sample.n; ++i) out.push_back(uniform_on_torus(torus, rng));
      return out;
    case Placement::well_separated: {
      const double d = well_separated_distance(torus);
      const double packed = static_cast<double>(sample.n) * std::numbers::pi * d * d / 4.0;
      if (d > torus.max_distance() && sample.n > 1) {
        throw std::invalid_argument("torus too small for a well-separated pair");
      }
      if (packed > 0.5 * torus.area()) {
        throw std::invalid_argument("cannot place " + std::to_string(sample.n) +
                                    " well-separated points on T(" +
                                    std::to_string(torus.sidelength()) + ")");
      }
      constexpr int kAttempts = 100000;
      const double d2 = d * d;
      for (std::size_t i = 0; i < sample.n; ++i) {
        bool placed = false;
        for (int a = 0; a < kAttempts && !placed; ++a) {
          const TorusPoint p = uniform_on_torus(torus, rng);
          placed = std::all_of(out.begin(), out.end(),
                               [&](TorusPoint q) { return torus.distance_sq(p, q) >= d2; });
          if (placed) out.push_back(p);
        }
        if (!placed) throw std::invalid_argument("well-separated placement gave up");
      }
      return out;
    }
  }
  return out;
}

// --- event driver ----------------------------------------------------------------

EventDriver::EventDriver(const EventLaw& law, const TorusSpec& torus) : law_(law), torus_(torus) {
  small_ = build(EventScale::small);
  large_ = build(EventScale::large);
}

double EventDriver::weight(EventScale scale, double base_radius) const {
  return torus_ball_volume(law_.effective_radius(scale, base_radius), torus_) /
         law_.intensity_divisor(scale);
}

EventDriver::ClassSampler EventDriver::build(EventScale scale) const {
  ClassSampler s;
  s.scale = scale;
  if (scale == EventScale::large && !law_.large_active()) return s;
  const auto& radii = law_.cls(scale).radii;
  if (law_.effective_radius(scale, radii.max_radius()) > torus_.max_distance()) {
    throw std::invalid_argument("event radius exceeds the diameter of the torus");
  }
  for (const auto& a : radii.atoms()) {
    if (a.weight <= 0.0) continue;
    s.atom_rate += a.weight * weight(scale, a.radius);
    s.atom_cumulative.push_back(s.atom_rate);
    s.atom_radius.push_back(a.radius);
  }
  if (const auto& dens = radii.density()) {
    const auto& g = dens->radii;
    const auto& v = dens->values;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      double m = 0.0;
      if (v[i] != 0.0 || v[i + 1] != 0.0) {
        const double r0 = g[i], r1 = g[i + 1], v0 = v[i], v1 = v[i + 1];
        m = quad::adaptive(
            [&](double r) {
              return (v0 + (v1 - v0) * (r - r0) / (r1 - r0)) * weight(scale, r);
            },
            r0, r1);
      }
      s.density_rate += m;
      s.segment_cumulative.push_back(s.density_rate);
    }
  }
  s.rate = s.atom_rate + s.density_rate;
  return s;
}

double EventDriver::per_block_rate() const { return small_.rate + large_.rate; }

double EventDriver::class_rate(EventScale scale) const {
  return scale == EventScale::small ? small_.rate : large_.rate;
}

double EventDriver::sample_radius(const ClassSampler& s, Rng& rng) const {
  const double v = rng.uniform() * s.rate;
  if (v < s.atom_rate) {
    const auto it = std::upper_bound(s.atom_cumulative.begin(), s.atom_cumulative.end(), v);
    const auto i = std::min<std::size_t>(it - s.atom_cumulative.begin(), s.atom_radius.size() - 1);
    return s.atom_radius[i];
  }
  const double w = v - s.atom_rate;
  const auto it = std::upper_bound(s.segment_cumulative.begin(), s.segment_cumulative.end(), w);
  auto seg = static_cast<std::size_t>(it - s.segment_cumulative.begin());
  seg = std::min(seg, s.segment_cumulative.size() - 1);
  const auto& dens = *law_.cls(s.scale).radii.density();
  const double r0 = dens.radii[seg], r1 = dens.radii[seg + 1];
  const double v0 = dens.values[seg], v1 = dens.values[seg + 1];
  // Ball volume is increasing in r, so its value at r1 bounds the weight.
  const double bound = std::max(v0, v1) * weight(s.scale, r1);
  while (true) {
    const double r = rng.uniform(r0, r1);
    const double f = (v0 + (v1 - v0) * (r - r0) / (r1 - r0)) * weight(s.scale, r);
    if (rng.uniform() * bound <= f) return r;
  }
}

const EventDriver::ClassSampler& EventDriver::pick(Rng& rng) const {
  if (large_.rate <= 0.0) return small_;
  if (small_.rate <= 0.0) return large_;
  return rng.uniform() * (small_.rate + large_.rate) < small_.rate ? small_ : large_;
}

Candidate EventDriver::propose_around(TorusPoint label, Rng& rng) const {
  const ClassSampler& s = pick(rng);
  Candidate c;
  c.scale = s.scale;
  c.base_radius = sample_radius(s, rng);
  c.radius = law_.effective_radius(s.scale, c.base_radius);
  c.center = uniform_in_ball(label, c.radius, torus_, rng);
  return c;
}

Candidate EventDriver::propose(std::span<const Block> blocks, Rng& rng) const {
  const double total = static_cast<double>(blocks.size()) * per_block_rate();
  Candidate c;
  if (total <= 0.0) {
    c.wait = kNever;
    return c;
  }
  const double wait = rng.exponential(total);
  const std::size_t i = rng.index(blocks.size());
  c = propose_around(blocks[i].label, rng);
  c.wait = wait;
  const double r2 = c.radius * c.radius;
  c.coverage = 1;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (j != i && torus_.distance_sq(blocks[j].label, c.center) <= r2) ++c.coverage;
  }
  c.accepted = c.coverage == 1 || rng.index(static_cast<std::size_t>(c.coverage)) == 0;
  return c;
}

Candidate EventDriver::propose_single(TorusPoint label, Rng& rng) const {
  const double total = per_block_rate();
  Candidate c;
  if (total <= 0.0) {
    c.wait = kNever;
    return c;
  }
  const double wait = rng.exponential(total);
  c = propose_around(label, rng);
  c.wait = wait;
  c.coverage = 1;
  c.accepted = true;
  return c;
}

Candidate next_event(const LabelledPartition& state, const EventLaw& law, const TorusSpec& torus,
                     Rng& rng) {
  return EventDriver(law, torus).propose(state.blocks(), rng);
}

// --- simulation -------------------------------------------------------------------

std::vector<double> default_gathering_thresholds(const EventLaw& law) {
  std::vector<double> out;
  if (law.large_active()) out.push_back(2.0 * law.psi * law.large->radii.max_radius());
  out.push_back(2.0 * law.small.radii.max_radius());
  return out;
}

TorusPoint snap_to_grid(TorusPoint p, const TorusSpec& torus, int grid) {
  const double cell = torus.sidelength() / grid;
  auto centre = [&](double c) {
    int i = static_cast<int>(std::floor((c + torus.half()) / cell));
    i = std::clamp(i, 0, grid - 1);
    return -torus.half() + (i + 0.5) * cell;
  };
  return {centre(p.x), centre(p.y)};
}

namespace {

class Tracker {
 public:
  Tracker(std::span<const TorusPoint> initial, const TorusSpec& torus,
          const SimulationOptions& options, std::vector<double> thresholds)
      : torus_(torus), options_(options), state_(LabelledPartition::singletons(initial)) {
    rec_.sidelength = torus.sidelength();
    rec_.n = initial.size();
    rec_.initial_labels.assign(initial.begin(), initial.end());
    rec_.gathering_thresholds = std::move(thresholds);
    if (options.track_pairs) {
      const std::size_t pairs = pair_count(rec_.n);
      rec_.coalescence_times.assign(pairs, kNever);
      rec_.gathering_times.assign(rec_.gathering_thresholds.size(),
                                  std::vector<double>(pairs, kNever));
      block_of_.resize(rec_.n);
      observe(0.0);
    }
  }

  LabelledPartition& state() { return state_; }
  GenealogyRecord& record() { return rec_; }

  /// Applies a drive event; returns the number of affected blocks.
  std::size_t apply(const DriveEvent& e) {
    const double r2 = e.radius * e.radius;
    affected_.clear();
    const auto& blocks = state_.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const TorusPoint l = blocks[b].label;
      if (torus_.distance_sq(l, e.center) > r2) continue;
      std::uint64_t key = e.key;
      if (options_.snap_grid) key ^= splitmix64(static_cast<std::uint64_t>(blocks[b].members[0]) + 1);
      if (hashed_uniform(key, l.x, l.y) < e.impact) affected_.push_back(b);
    }
    if (affected_.empty()) return 0;
    MergeEvent me;
    me.time = e.time;
    me.scale = e.scale;
    me.radius = e.radius;
    me.label = e.landing;
    me.merged.reserve(affected_.size());
    for (std::size_t b : affected_) me.merged.push_back(blocks[b].members);
    std::sort(me.merged.begin(), me.merged.end());
    if (!options_.frozen) state_.merge(affected_, e.landing);
    rec_.events.push_back(std::move(me));
    if (options_.record_drive) rec_.drive.push_back(e);
    if (options_.track_pairs && !options_.frozen) observe(e.time);
    return affected_.size();
  }

  bool all_gathered() const {
    if (rec_.gathering_times.empty()) return true;
    const auto& g = rec_.gathering_times.front();
    return std::all_of(g.begin(), g.end(), [](double t) { return std::isfinite(t); });
  }

  void observe(double t) {
    const auto& blocks = state_.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (int m : blocks[b].members) block_of_[m] = b;
    }
    const int n = static_cast<int>(rec_.n);
    std::size_t p = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++p) {
        const std::size_t bi = block_of_[i], bj = block_of_[j];
        if (!std::isfinite(rec_.coalescence_times[p]) && bi == bj) rec_.coalescence_times[p] = t;
        double d2 = -1.0;
        for (std::size_t h = 0; h < rec_.gathering_thresholds.size(); ++h) {
          double& g = rec_.gathering_times[h][p];
          if (std::isfinite(g)) continue;
          if (d2 < 0.0) d2 = bi == bj ? 0.0 : torus_.distance_sq(blocks[bi].label, blocks[bj].label);
          const double thr = rec_.gathering_thresholds[h];
          if (d2 < thr * thr) g = t;
        }
      }
    }
  }

  GenealogyRecord finish(double end_time) {
    rec_.end_time = end_time;
    rec_.reached_mrca = state_.size() == 1;
    rec_.final_state = state_;
    return std::move(rec_);
  }

 private:
  const TorusSpec& torus_;
  const SimulationOptions& options_;
  LabelledPartition state_;
  GenealogyRecord rec_;
  std::vector<std::size_t> block_of_;
  std::vector<std::size_t> affected_;
};

std::vector<double> thresholds_for(const SimulationOptions& options, const EventLaw* law) {
  if (!options.gathering_thresholds.empty() || law == nullptr) return options.gathering_thresholds;
  return default_gathering_thresholds(*law);
}

}  // namespace

GenealogyRecord simulate_genealogy(std::span<const TorusPoint> initial, const EventLaw& law,
                                   const TorusSpec& torus, const SimulationOptions& options,
                                   Rng& rng) {
  if (initial.empty()) throw std::invalid_argument("sample must contain at least one lineage");
  for (const auto& p : initial) {
    if (!torus.is_canonical(p)) throw std::invalid_argument("sample point outside the torus");
  }
  const EventDriver driver(law, torus);
  if (options.until_mrca && !std::isfinite(options.horizon) && initial.size() > 1) {
    const double moves = single_lineage_jump_rate(law, EventScale::small) +
                         single_lineage_jump_rate(law, EventScale::large);
    if (!(moves > 0.0)) {
      throw SimulationTimeout("no event ever affects a lineage; the MRCA is never reached");
    }
  }
  Tracker tracker(initial, torus, options, thresholds_for(options, &law));
  auto& state = tracker.state();
  auto& rec = tracker.record();
  double t = 0.0;
  while (true) {
    if (options.until_mrca && state.size() == 1) break;
    if (options.stop_when_gathered && tracker.all_gathered()) break;
    if (options.homogenize) {
      for (std::size_t b = 0; b < state.size(); ++b) state.relabel(b, uniform_on_torus(torus, rng));
    }
    const Candidate c = driver.propose(state.blocks(), rng);
    if (!std::isfinite(c.wait) || t + c.wait > options.horizon) {
      t = options.horizon;
      break;
    }
    t += c.wait;
    if (++rec.candidate_events > options.max_events) {
      throw SimulationTimeout("exceeded " + std::to_string(options.max_events) +
                              " candidate events before completion");
    }
    if (!c.accepted) continue;
    ++rec.accepted_events;
    const double u = driver.sample_impact(c, rng);
    if (u <= 0.0) continue;
    DriveEvent e;
    e.time = t;
    e.scale = c.scale;
    e.base_radius = c.base_radius;
    e.radius = c.radius;
    e.center = c.center;
    e.impact = u;
    e.landing = uniform_in_ball(c.center, c.radius, torus, rng);
    if (options.snap_grid) e.landing = snap_to_grid(e.landing, torus, *options.snap_grid);
    e.key = rng();
    const std::size_t k = tracker.apply(e);
    if (options.stop_on_first_merger && k >= 2) break;
  }
  return tracker.finish(t);
}

GenealogyRecord simulate_genealogy(const SampleConfig& sample, const EventLaw& law,
                                   const TorusSpec& torus, const SimulationOptions& options,
                                   Rng& rng) {
  const auto labels = place_sample(sample, torus, rng);
  return simulate_genealogy(labels, law, torus, options, rng);
}

GenealogyRecord replay(std::span<const TorusPoint> initial, std::span<const DriveEvent> drive,
                       const TorusSpec& torus, const SimulationOptions& options) {
  Tracker tracker(initial, torus, options, thresholds_for(options, nullptr));
  double t = 0.0;
  for (const auto& e : drive) {
    if (options.until_mrca && tracker.state().size() == 1) break;
    if (e.time > options.horizon) break;
    t = e.time;
    tracker.apply(e);
  }
  return tracker.finish(t);
}

GenealogyRecord restrict(const GenealogyRecord& record, std::span<const int> subsample) {
  std::vector<int> keep(subsample.begin(), subsample.end());
  std::sort(keep.begin(), keep.end());
  if (keep.empty() || std::adjacent_find(keep.begin(), keep.end()) != keep.end() ||
      keep.front() < 0 || static_cast<std::size_t>(keep.back()) >= record.n) {
    throw std::invalid_argument("subsample must be distinct indices of the sample");
  }
  std::vector<int> map(record.n, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
  auto project = [&](const std::vector<int>& members) {
    std::vector<int> out;
    for (int m : members) {
      if (map[m] >= 0) out.push_back(map[m]);
    }
    return out;
  };

  GenealogyRecord out;
  out.sidelength = record.sidelength;
  out.n = keep.size();
  for (int i : keep) out.initial_labels.push_back(record.initial_labels[i]);
  const bool with_drive = record.drive.size() == record.events.size();
  for (std::size_t k = 0; k < record.events.size(); ++k) {
    const auto& e = record.events[k];
    MergeEvent r{e.time, e.scale, e.radius, {}, e.label};
    for (const auto& m : e.merged) {
      auto p = project(m);
      if (!p.empty()) r.merged.push_back(std::move(p));
    }
    if (r.merged.empty()) continue;
    std::sort(r.merged.begin(), r.merged.end());
    out.events.push_back(std::move(r));
    if (with_drive) out.drive.push_back(record.drive[k]);
  }
  std::vector<Block> blocks;
  for (const auto& b : record.final_state.blocks()) {
    auto p = project(b.members);
    if (!p.empty()) blocks.push_back({std::move(p), b.label});
  }
  out.final_state = LabelledPartition(std::move(blocks), out.n);
  out.end_time = record.end_time;
  out.reached_mrca = out.final_state.size() == 1;
  out.candidate_events = record.candidate_events;
  out.accepted_events = record.accepted_events;
  out.gathering_thresholds = record.gathering_thresholds;
  if (!record.coalescence_times.empty()) {
    const int m = static_cast<int>(out.n);
    out.coalescence_times.assign(pair_count(out.n), kNever);
    out.gathering_times.assign(record.gathering_times.size(), std::vector<double>(pair_count(out.n)));
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const auto src = pair_index(record.n, keep[i], keep[j]);
        const auto dst = pair_index(out.n, i, j);
        out.coalescence_times[dst] = record.coalescence_times[src];
        for (std::size_t h = 0; h < record.gathering_times.size(); ++h) {
          out.gathering_times[h][dst] = record.gathering_times[h][src];
        }
      }
    }
  }
  return out;
}

GenealogyRecord rescale_time_and_space(const GenealogyRecord& record, double time_factor,
                                       double space_factor) {
  if (!(time_factor > 0.0) || !(space_factor > 0.0)) {
    throw std::invalid_argument("rescaling factors must be positive");
  }
  auto pt = [&](TorusPoint p) { return TorusPoint{p.x * space_factor, p.y * space_factor}; };
  GenealogyRecord out = record;
  out.sidelength *= space_factor;
  for (auto& p : out.initial_labels) p = pt(p);
  for (auto& e : out.events) {
    e.time /= time_factor;
    e.radius *= space_factor;
    e.label = pt(e.label);
  }
  for (auto& e : out.drive) {
    e.time /= time_factor;
    e.radius *= space_factor;
    e.base_radius *= space_factor;
    e.center = pt(e.center);
    e.landing = pt(e.landing);
  }
  std::vector<Block> blocks = record.final_state.blocks();
  for (auto& b : blocks) b.label = pt(b.label);
  out.final_state = LabelledPartition(std::move(blocks), record.final_state.sample_size());
  out.end_time /= time_factor;
  for (auto& t : out.coalescence_times) t /= time_factor;
  for (auto& h : out.gathering_thresholds) h *= space_factor;
  for (auto& g : out.gathering_times) {
    for (auto& t : g) t /= time_factor;
  }
  return out;
}

// --- single lineage -----------------------------------------------------------------

EntranceResult first_entrance(const EventDriver& driver, TorusPoint start, double radius,
                              double horizon, Rng& rng) {
  const auto& torus = driver.torus();
  const double r2 = radius * radius;
  const TorusPoint origin{0.0, 0.0};
  TorusPoint pos = torus.canonical(start);
  EntranceResult res;
  if (torus.distance_sq(pos, origin) <= r2) {
    res.time = 0.0;
    res.entered = true;
    return res;
  }
  const auto& law = driver.law();
  const double moves = single_lineage_jump_rate(law, EventScale::small) +
                       single_lineage_jump_rate(law, EventScale::large);
  if (!(moves > 0.0)) return res;
  double t = 0.0;
  while (true) {
    const Candidate c = driver.propose_single(pos, rng);
    if (!std::isfinite(c.wait) || t + c.wait > horizon) return res;
    t += c.wait;
    if (rng.uniform() >= driver.sample_impact(c, rng)) continue;
    pos = uniform_in_ball(c.center, c.radius, torus, rng);
    ++res.jumps;
    if (torus.distance_sq(pos, origin) <= r2) {
      res.time = t;
      res.entered = true;
      return res;
    }
  }
}

TorusPoint lineage_position(const EventDriver& driver, TorusPoint start, double t, Rng& rng) {
  const auto& torus = driver.torus();
  TorusPoint pos = torus.canonical(start);
  double s = 0.0;
  while (true) {
    const Candidate c = driver.propose_single(pos, rng);
    if (!std::isfinite(c.wait) || s + c.wait > t) return pos;
    s += c.wait;
    if (rng.uniform() < driver.sample_impact(c, rng)) {
      pos = uniform_in_ball(c.center, c.radius, torus, rng);
    }
  }
}

// --- JSON lines log -----------------------------------------------------------------

namespace {

using nlohmann::json;

json time_json(double t) { return std::isfinite(t) ? json(t) : json(nullptr); }
double time_from(const json& j) { return j.is_null() ? kNever : j.get<double>(); }
json point_json(TorusPoint p) { return json::array({p.x, p.y}); }
TorusPoint point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json times_json(const std::vector<double>& ts) {
  json a = json::array();
  for (double t : ts) a.push_back(time_json(t));
  return a;
}

std::vector<double> times_from(const json& a) {
  std::vector<double> out;
  for (const auto& t : a) out.push_back(time_from(t));
  return out;
}

EventScale scale_from(const std::string& s) {
  if (s == "small") return EventScale::small;
  if (s == "large") return EventScale::large;
  throw std::runtime_error("unknown event class '" + s + "' in event log");
}

}  // namespace

void write_event_log(std::ostream& out, const GenealogyRecord& record) {
  json header{{"type", "header"},
              {"n", record.n},
              {"L", record.sidelength},
              {"initial", json::array()},
              {"thresholds", record.gathering_thresholds}};
  for (const auto& p : record.initial_labels) header["initial"].push_back(point_json(p));
  out << header.dump() << '\n';
  const bool with_drive = record.drive.size() == record.events.size();
  for (std::size_t k = 0; k < record.events.size(); ++k) {
    const auto& e = record.events[k];
    json line{{"type", "event"},
              {"time", e.time},
              {"class", std::string(to_string(e.scale))},
              {"radius", e.radius},
              {"merged", e.merged},
              {"label", point_json(e.label)}};
    if (with_drive) {
      const auto& d = record.drive[k];
      line["drive"] = json{{"base_radius", d.base_radius},
                           {"center", point_json(d.center)},
                           {"impact", d.impact},
                           {"key", d.key}};
    }
    out << line.dump() << '\n';
  }
  json fin{{"type", "final"},
           {"end_time", time_json(record.end_time)},
           {"reached_mrca", record.reached_mrca},
           {"candidate_events", record.candidate_events},
           {"accepted_events", record.accepted_events},
           {"blocks", json::array()},
           {"coalescence_times", times_json(record.coalescence_times)},
           {"gathering_times", json::array()}};
  for (const auto& b : record.final_state.blocks()) {
    fin["blocks"].push_back(json{{"members", b.members}, {"label", point_json(b.label)}});
  }
  for (const auto& g : record.gathering_times) fin["gathering_times"].push_back(times_json(g));
  out << fin.dump() << '\n';
}

GenealogyRecord read_event_log(std::istream& in) {
  GenealogyRecord rec;
  std::string line;
  bool have_header = false, have_final = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        rec.n = j.at("n").get<std::size_t>();
        rec.sidelength = j.at("L").get<double>();
        for (const auto& p : j.at("initial")) rec.initial_labels.push_back(point_from(p));
        rec.gathering_thresholds = j.at("thresholds").get<std::vector<double>>();
        have_header = true;
      } else if (type == "event") {
        MergeEvent e;
        e.time = j.at("time").get<double>();
        e.scale = scale_from(j.at("class").get<std::string>());
        e.radius = j.at("radius").get<double>();
        e.merged = j.at("merged").get<std::vector<std::vector<int>>>();
        e.label = point_from(j.at("label"));
        if (j.contains("drive")) {
          const auto& d = j["drive"];
          rec.drive.push_back({e.time, e.scale, d.at("base_radius").get<double>(), e.radius,
                               point_from(d.at("center")), d.at("impact").get<double>(), e.label,
                               d.at("key").get<std::uint64_t>()});
        }
        rec.events.push_back(std::move(e));
      } else if (type == "final") {
        rec.end_time = time_from(j.at("end_time"));
        rec.reached_mrca = j.at("reached_mrca").get<bool>();
        rec.candidate_events = j.at("candidate_events").get<std::uint64_t>();
        rec.accepted_events = j.at("accepted_events").get<std::uint64_t>();
        std::vector<Block> blocks;
        for (const auto& b : j.at("blocks")) {
          blocks.push_back({b.at("members").get<std::vector<int>>(), point_from(b.at("label"))});
        }
        rec.final_state = LabelledPartition(std::move(blocks), rec.n);
        rec.coalescence_times = times_from(j.at("coalescence_times"));
        for (const auto& g : j.at("gathering_times")) rec.gathering_times.push_back(times_from(g));
        have_final = true;
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw std::runtime_error("event log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header || !have_final) throw std::runtime_error("event log is missing header or final line");
  return rec;
}

}  // namespace slfv
