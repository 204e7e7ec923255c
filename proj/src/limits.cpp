#include "slfv/limits.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "slfv/errors.hpp"

namespace slfv {

namespace {

Partition singleton_partition(std::size_t n) {
  Partition p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {static_cast<int>(i)};
  return p;
}

Partition merged(const Partition& p, std::vector<std::size_t> which) {
  std::sort(which.begin(), which.end());
  Partition out;
  std::vector<int> group;
  for (std::size_t i = 0, w = 0; i < p.size(); ++i) {
    if (w < which.size() && which[w] == i) {
      group.insert(group.end(), p[i].begin(), p[i].end());
      ++w;
    } else {
      out.push_back(p[i]);
    }
  }
  std::sort(group.begin(), group.end());
  out.push_back(std::move(group));
  std::sort(out.begin(), out.end());
  return out;
}

double unit_ball_volume(double radius) {
  static const TorusSpec unit(1.0);
  return torus_ball_volume(std::min(radius, unit.max_distance()), unit);
}

void check_unit_radius(double c, const EventClass& large) {
  if (!(c > 0.0)) throw std::invalid_argument("scale c must be positive");
  const double mass = large.radii.total_mass();
  if (!std::isfinite(mass)) throw std::invalid_argument("large radius measure must have finite mass");
  if (c * large.radii.max_radius() > TorusSpec(1.0).max_distance() * (1.0 + 1e-12)) {
    throw std::invalid_argument("c times the largest radius exceeds 1/sqrt(2) on T(1)");
  }
}

}  // namespace

std::size_t PartitionPath::blocks_at(double t) const { return at(t).size(); }

const Partition& PartitionPath::at(double t) const {
  auto it = std::upper_bound(steps.begin(), steps.end(), t,
                             [](double x, const Step& s) { return x < s.time; });
  if (it == steps.begin()) throw std::out_of_range("time before the start of the path");
  return std::prev(it)->partition;
}

PartitionPath sample_kingman(std::size_t n, double rate, double horizon, Rng& rng) {
  if (n < 1) throw std::invalid_argument("Kingman coalescent needs n >= 1");
  if (!(rate > 0.0)) throw std::invalid_argument("Kingman rate must be positive");
  PartitionPath path;
  path.n = n;
  path.steps.push_back({0.0, singleton_partition(n)});
  double t = 0.0;
  while (path.steps.back().partition.size() >= 2) {
    const auto& cur = path.steps.back().partition;
    const double k = static_cast<double>(cur.size());
    const double wait = rng.exponential(rate * k * (k - 1.0) / 2.0);
    if (t + wait > horizon) {
      path.end_time = horizon;
      return path;
    }
    t += wait;
    const std::size_t i = rng.index(cur.size());
    std::size_t j = rng.index(cur.size() - 1);
    if (j >= i) ++j;
    path.steps.push_back({t, merged(cur, {i, j})});
  }
  path.end_time = t;
  return path;
}

PartitionPath sample_lambda_beta_c(std::size_t n, double c, double beta, const EventClass& large,
                                   double horizon, Rng& rng) {
  if (n < 1) throw std::invalid_argument("coalescent needs n >= 1");
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  check_unit_radius(c, large);
  PartitionPath path;
  path.n = n;
  path.steps.push_back({0.0, singleton_partition(n)});
  const double mass = large.radii.total_mass();
  const double event_rate = mass / (c * c);
  const double pair_mass = large.integrate([&](double r, const ImpactDistribution& nu) {
    const double v = unit_ball_volume(c * r);
    return v * v * nu.moment(2);
  });
  if (!std::isfinite(horizon) && beta == 0.0 && !(pair_mass > 0.0) && n > 1) {
    throw SimulationTimeout("no merger is ever possible; the path is constant forever");
  }
  double t = 0.0;
  while (path.steps.back().partition.size() >= 2) {
    const auto& cur = path.steps.back().partition;
    const double k = static_cast<double>(cur.size());
    const double kingman = beta * k * (k - 1.0) / 2.0;
    const double total = kingman + event_rate;
    if (!(total > 0.0)) break;
    const double wait = rng.exponential(total);
    if (t + wait > horizon) {
      path.end_time = horizon;
      return path;
    }
    t += wait;
    if (rng.uniform() * total < kingman) {
      const std::size_t i = rng.index(cur.size());
      std::size_t j = rng.index(cur.size() - 1);
      if (j >= i) ++j;
      path.steps.push_back({t, merged(cur, {i, j})});
      continue;
    }
    const double r = large.radii.sample(rng);
    const double p = unit_ball_volume(c * r) * large.impact.at(r).sample(rng);
    std::vector<std::size_t> marked;
    for (std::size_t b = 0; b < cur.size(); ++b) {
      if (rng.uniform() < p) marked.push_back(b);
    }
    if (marked.size() < 2) {
      path.null_events.push_back(t);
      continue;
    }
    path.steps.push_back({t, merged(cur, std::move(marked))});
  }
  path.end_time = t;
  return path;
}

GenealogyRecord sample_spatial_limit(std::span<const TorusPoint> points, double b, double c,
                                     const EventClass& large, double sigma_s2, double horizon,
                                     Rng& rng, bool stop_at_mrca) {
  if (points.empty()) throw std::invalid_argument("spatial limit needs at least one lineage");
  if (b < 0.0 || sigma_s2 < 0.0) throw std::invalid_argument("diffusion parameters must be non-negative");
  check_unit_radius(c, large);
  const TorusSpec unit(1.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!unit.is_canonical(points[i])) throw std::invalid_argument("labels must lie on T(1)");
    for (std::size_t j = 0; j < i; ++j) {
      if (points[i] == points[j]) throw std::invalid_argument("initial labels must be distinct");
    }
  }
  const double mass = large.radii.total_mass();
  const double event_rate = mass / (c * c);
  const double sd_rate = std::sqrt(b * sigma_s2);
  const std::size_t n = points.size();
  if (!std::isfinite(horizon)) {
    const double reach = large.integrate(
        [](double, const ImpactDistribution& nu) { return nu.moment(1); });
    if (!stop_at_mrca || (n > 1 && !(reach > 0.0))) {
      throw SimulationTimeout("spatial limit run would never terminate");
    }
  }

  GenealogyRecord rec;
  rec.sidelength = 1.0;
  rec.n = n;
  rec.initial_labels.assign(points.begin(), points.end());
  rec.coalescence_times.assign(pair_count(n), kNever);
  auto state = LabelledPartition::singletons(points);

  auto diffuse = [&](double dt) {
    if (sd_rate == 0.0 || dt <= 0.0) return;
    const double sd = sd_rate * std::sqrt(dt);
    for (std::size_t i = 0; i < state.size(); ++i) {
      state.relabel(i, unit.translate(state[i].label, sd * rng.normal(), sd * rng.normal()));
    }
  };

  double t = 0.0;
  while (!(stop_at_mrca && state.size() == 1)) {
    const double wait = event_rate > 0.0 ? rng.exponential(event_rate) : kNever;
    if (t + wait > horizon) {
      diffuse(horizon - t);
      t = horizon;
      break;
    }
    diffuse(wait);
    t += wait;
    const TorusPoint x = uniform_on_torus(unit, rng);
    const double r = large.radii.sample(rng);
    const double radius = std::min(c * r, unit.max_distance());
    const double u = large.impact.at(r).sample(rng);
    std::vector<std::size_t> hit;
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (unit.distance_sq(state[i].label, x) <= radius * radius && rng.uniform() < u) {
        hit.push_back(i);
      }
    }
    if (hit.empty()) continue;
    MergeEvent e;
    e.time = t;
    e.scale = EventScale::large;
    e.radius = radius;
    e.label = uniform_in_ball(x, radius, unit, rng);
    for (std::size_t i : hit) e.merged.push_back(state[i].members);
    std::sort(e.merged.begin(), e.merged.end());
    state.merge(hit, e.label);
    rec.events.push_back(std::move(e));
    for (const auto& blk : state.blocks()) {
      for (std::size_t a = 0; a < blk.members.size(); ++a) {
        for (std::size_t z = a + 1; z < blk.members.size(); ++z) {
          double& ct = rec.coalescence_times[pair_index(n, blk.members[a], blk.members[z])];
          if (!std::isfinite(ct)) ct = t;
        }
      }
    }
  }
  rec.end_time = t;
  rec.reached_mrca = state.size() == 1;
  rec.final_state = std::move(state);
  return rec;
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("KS statistic of an empty sample");
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_exponential(std::span<const double> samples) {
  if (samples.size() < 10) throw std::invalid_argument("KS test needs at least 10 samples");
  return ks_statistic(samples, [](double t) { return t <= 0.0 ? 0.0 : -std::expm1(-t); });
}

double kolmogorov_pvalue(double d, std::size_t n) {
  if (n == 0) throw std::invalid_argument("KS p-value needs a sample");
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

void write_block_counts_csv(std::ostream& out, const PartitionPath& path) {
  out << "time,blocks\n";
  char buf[64];
  for (const auto& s : path.steps) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu\n", s.time, s.partition.size());
    out << buf;
  }
}

}  // namespace slfv
