#include "slfv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "slfv/errors.hpp"
#include "slfv/limits.hpp"
#include "slfv/parallel.hpp"

namespace slfv {

namespace {

constexpr double kExponentTol = 1e-12;

/// Limit of L^e (log L)^f as L -> infinity: +1 for infinity, 0 for a positive
/// constant, -1 for zero.
int growth(double e, double f) {
  if (e > kExponentTol || (std::abs(e) <= kExponentTol && f > kExponentTol)) return 1;
  if (e < -kExponentTol || (std::abs(e) <= kExponentTol && f < -kExponentTol)) return -1;
  return 0;
}

double l2logl(double L) { return L * L * std::log(L); }

std::uint64_t l_key(double L) { return static_cast<std::uint64_t>(std::llround(L * 1024.0)); }

double binomial(int n, int k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

double sigma2(const EventClass& cls) {
  EventLaw law;
  law.small = cls;
  return dispersal_variance(law, EventScale::small);
}

double ks_or_nan(std::span<const double> xs) {
  if (xs.empty()) return std::nan("");
  return ks_statistic(xs, [](double t) { return t <= 0.0 ? 0.0 : -std::expm1(-t); });
}

TorusPoint gamma1_start(const TorusSpec& torus, Rng& rng) {
  const double d2 = std::pow(well_separated_distance(torus), 2);
  for (;;) {
    const TorusPoint p = uniform_on_torus(torus, rng);
    if (torus.distance_sq(p, {0.0, 0.0}) >= d2) return p;
  }
}

void check_start(const TorusSpec& torus, TorusPoint start, double radius) {
  const double d = torus_distance(start, {0.0, 0.0}, torus);
  if (d <= radius) throw std::invalid_argument("start point lies inside the target ball");
  if (d < well_separated_distance(torus)) {
    throw std::invalid_argument("start point closer to the origin than L / log L");
  }
}

Eigen::MatrixXd block_generator(int n) { return Eigen::MatrixXd::Zero(n, n); }

std::vector<double> last_row_of_exp(const Eigen::MatrixXd& q, double t) {
  const Eigen::MatrixXd p = (q * t).exp();
  std::vector<double> out(q.rows());
  for (Eigen::Index j = 0; j < q.rows(); ++j) out[j] = std::max(0.0, p(q.rows() - 1, j));
  return out;
}

}  // namespace

double PowerLaw::operator()(double L) const {
  return coef * std::pow(L, power) * std::pow(std::log(L), log_power);
}

std::string_view to_string(TimescaleCase c) {
  switch (c) {
    case TimescaleCase::large_gathering:
      return "large-gathering";
    case TimescaleCase::mixed_gathering:
      return "mixed-gathering";
    case TimescaleCase::small_gathering:
      return "small-gathering";
    case TimescaleCase::kingman:
      return "kingman";
    case TimescaleCase::spatial_limit:
      return "spatial-limit";
    case TimescaleCase::lambda_coalescent:
      return "lambda-coalescent";
  }
  return "unknown";
}

Classification classify(const RegimeSpec& regime) {
  const auto& psi = regime.psi;
  if (!(psi.coef > 0.0)) throw UncoveredRegime("psi_L must be positive");
  if (growth(psi.power, psi.log_power) < 0) throw UncoveredRegime("psi_L must not vanish");
  Classification out;
  out.alpha = psi.power;
  if (psi.power > 1.0 + kExponentTol || (std::abs(psi.power - 1.0) <= kExponentTol && psi.log_power > 0)) {
    throw UncoveredRegime("psi_L grows faster than L (alpha > 1)");
  }
  const bool alpha_one = std::abs(psi.power - 1.0) <= kExponentTol;
  if (alpha_one && std::abs(psi.log_power) > kExponentTol) {
    throw UncoveredRegime("alpha = 1 requires psi_L = c L exactly");
  }
  if (alpha_one) out.c = psi.coef;
  if (!regime.rho) {
    out.kind = alpha_one ? TimescaleCase::kingman : TimescaleCase::small_gathering;
    return out;
  }
  const auto& rho = *regime.rho;
  if (!(rho.coef > 0.0)) throw UncoveredRegime("rho_L must be positive");
  if (growth(rho.power, rho.log_power) <= 0) throw UncoveredRegime("rho_L must increase to infinity");
  const double p = psi.power, q = psi.log_power, P = rho.power, Q = rho.log_power;
  if (alpha_one) {
    const int r1 = growth(P - 2.0, Q);
    if (r1 <= 0) {
      out.kind = TimescaleCase::spatial_limit;
      out.b = r1 == 0 ? rho.coef : 0.0;
      return out;
    }
    const int r2 = growth(P - 2.0, Q - 1.0);
    if (r2 > 0) {
      out.kind = TimescaleCase::kingman;
      return out;
    }
    out.kind = TimescaleCase::lambda_coalescent;
    out.rho_over_l2logl = r2 == 0 ? rho.coef : 0.0;
    return out;
  }
  const int ratio = growth(2 * p - P, 2 * q - Q);
  if (ratio > 0) {
    out.kind = TimescaleCase::large_gathering;
    return out;
  }
  if (growth(2 * p - P, 2 * q - Q + 1.0) > 0) {
    out.kind = TimescaleCase::mixed_gathering;
    out.b = ratio == 0 ? psi.coef * psi.coef / rho.coef : 0.0;
    return out;
  }
  if (growth(4 * p - P, 4 * q - Q) <= 0 || growth(2.0 - P, 1.0 - Q) < 0) {
    out.kind = TimescaleCase::small_gathering;
    return out;
  }
  throw UncoveredRegime(
      "psi_L^2 log L / rho_L stays bounded while psi_L^4 / rho_L and L^2 log L / rho_L do not "
      "vanish: no exponential limit is known");
}

EventLaw law_at(const RegimeSpec& regime, double L, const EventClass& small,
                const std::optional<EventClass>& large) {
  EventLaw law;
  law.small = small;
  if (regime.rho && large) {
    law.large = *large;
    law.psi = regime.psi(L);
    law.rho = (*regime.rho)(L);
  }
  return law;
}

double predicted_timescale(const RegimeSpec& regime, double L, const EventClass& small,
                           const std::optional<EventClass>& large) {
  const auto cls = classify(regime);
  const double ss = sigma2(small);
  const double sb = large ? sigma2(*large) : 0.0;
  const double k = l2logl(L);
  switch (cls.kind) {
    case TimescaleCase::large_gathering: {
      if (!(sb > 0.0)) throw std::invalid_argument("large events never move a lineage");
      const double psi = regime.psi(L);
      return (1.0 - cls.alpha) * (*regime.rho)(L) * k / (2.0 * std::numbers::pi * sb * psi * psi);
    }
    case TimescaleCase::mixed_gathering:
      return (1.0 - cls.alpha) * k / (2.0 * std::numbers::pi * (ss + cls.b * sb));
    case TimescaleCase::small_gathering:
    case TimescaleCase::kingman:
      return ss > 0.0 ? k / (2.0 * std::numbers::pi * ss) : kNever;
    case TimescaleCase::spatial_limit:
    case TimescaleCase::lambda_coalescent:
      return (*regime.rho)(L);
  }
  return kNever;
}

double gathering_threshold(const RegimeSpec& regime, double L, const EventClass& small,
                           const std::optional<EventClass>& large) {
  const auto cls = classify(regime);
  if ((cls.kind == TimescaleCase::large_gathering || cls.kind == TimescaleCase::mixed_gathering) &&
      large) {
    return 2.0 * regime.psi(L) * large->radii.max_radius();
  }
  return 2.0 * small.radii.max_radius();
}

// --- helpers -----------------------------------------------------------------------

Trend weak_trend(std::vector<double> values, double band) {
  Trend t{std::move(values), band, true};
  for (std::size_t i = 0; i + 1 < t.values.size(); ++i) {
    if (!(t.values[i + 1] <= t.values[i] + band)) t.weakly_decreasing = false;
  }
  return t;
}

double ks_noise_band(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

Proportion proportion(std::size_t hits, std::size_t trials) {
  if (trials == 0) return {};
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))};
}

std::vector<double> kingman_block_distribution(int n, double t) {
  if (n < 1) throw std::invalid_argument("block distribution needs n >= 1");
  Eigen::MatrixXd q = block_generator(n);
  for (int j = 2; j <= n; ++j) {
    const double rate = j * (j - 1) / 2.0;
    q(j - 1, j - 2) = rate;
    q(j - 1, j - 1) = -rate;
  }
  return last_row_of_exp(q, t);
}

std::vector<double> lambda_block_distribution(int n, double t, double c, double beta,
                                              const EventClass& large) {
  if (n < 1) throw std::invalid_argument("block distribution needs n >= 1");
  Eigen::MatrixXd q = block_generator(n);
  for (int m = 2; m <= n; ++m) {
    double out = 0.0;
    for (int k = 2; k <= m; ++k) {
      const double rate = binomial(m, k) * lambda_beta_c_rate(m, k, c, beta, large);
      q(m - 1, m - k) += rate;
      out += rate;
    }
    q(m - 1, m - 1) = -out;
  }
  return last_row_of_exp(q, t);
}

// --- pair times -----------------------------------------------------------------

std::uint64_t genealogy_seed(std::uint64_t root, double L, std::size_t replicate) {
  return derive_seed(root, stream_id("genealogy"), l_key(L), replicate);
}

PairTimeSetup make_pair_time_setup(const RegimeSpec& regime, double L, const EventClass& small,
                                   const std::optional<EventClass>& large, std::uint64_t seed) {
  PairTimeSetup s;
  s.L = L;
  s.regime = classify(regime);
  s.law = law_at(regime, L, small, large);
  check_admissibility(s.law);
  s.phi = predicted_timescale(regime, L, small, large);
  s.threshold = gathering_threshold(regime, L, small, large);
  s.horizon = 50.0 * s.phi;
  s.seed = seed;
  return s;
}

namespace {

bool moves(const EventLaw& law) {
  return single_lineage_jump_rate(law, EventScale::small) +
             single_lineage_jump_rate(law, EventScale::large) >
         0.0;
}

}  // namespace

PairTimeSample pair_time_replicate(const PairTimeSetup& setup, std::size_t replicate) {
  PairTimeSample out;
  if (!std::isfinite(setup.phi) || !moves(setup.law)) return out;
  const TorusSpec torus(setup.L);
  Rng rng(genealogy_seed(setup.seed, setup.L, replicate));
  SimulationOptions opt;
  opt.horizon = setup.horizon;
  opt.gathering_thresholds = {setup.threshold};
  try {
    const auto rec = simulate_genealogy(SampleConfig{setup.n, Placement::well_separated, {}},
                                        setup.law, torus, opt, rng);
    out.gathering = rec.gathering_times[0][0];
    out.coalescence = rec.coalescence_times[0];
  } catch (const SimulationTimeout&) {
  }
  return out;
}

PairTimeResult summarize_pair_times(const PairTimeSetup& setup, std::span<const PairTimeSample> raw) {
  PairTimeResult r;
  r.L = setup.L;
  r.phi = setup.phi;
  r.non_coalescing = !std::isfinite(setup.phi) || !moves(setup.law);
  double sum = 0.0;
  std::size_t finite = 0;
  for (const auto& s : raw) {
    r.gathering.push_back(s.gathering / setup.phi);
    r.coalescence.push_back(s.coalescence / setup.phi);
    if (std::isfinite(s.coalescence)) {
      sum += s.coalescence / setup.phi;
      ++finite;
    } else {
      ++r.censored;
    }
  }
  r.mean_coalescence = finite > 0 ? sum / static_cast<double>(finite) : std::nan("");
  if (r.non_coalescing) {
    r.ks_gathering = r.ks_coalescence = raw.empty() ? std::nan("") : 1.0;
  } else {
    r.ks_gathering = ks_or_nan(r.gathering);
    r.ks_coalescence = ks_or_nan(r.coalescence);
  }
  return r;
}

PairTimeExperiment pair_time_experiment(const RegimeSpec& regime, std::span<const double> ls,
                                        std::size_t replicates, const EventClass& small,
                                        const std::optional<EventClass>& large, std::uint64_t seed,
                                        unsigned threads) {
  PairTimeExperiment exp;
  std::vector<double> kg, kc;
  for (double L : ls) {
    const auto setup = make_pair_time_setup(regime, L, small, large, seed);
    std::vector<PairTimeSample> raw(replicates);
    parallel_for(0, replicates, threads, [&](std::size_t i) { raw[i] = pair_time_replicate(setup, i); });
    exp.per_l.push_back(summarize_pair_times(setup, raw));
    kg.push_back(exp.per_l.back().ks_gathering);
    kc.push_back(exp.per_l.back().ks_coalescence);
  }
  exp.gathering_trend = weak_trend(std::move(kg), ks_noise_band(replicates));
  exp.coalescence_trend = weak_trend(std::move(kc), ks_noise_band(replicates));
  return exp;
}

// --- block counts --------------------------------------------------------------------

BlockCountSetup make_block_count_setup(std::size_t n, const RegimeSpec& regime, double L,
                                       std::vector<double> times, const EventClass& small,
                                       const std::optional<EventClass>& large, std::uint64_t seed) {
  if (n < 1 || n > 8) throw std::invalid_argument("block-count experiments take 1 <= n <= 8");
  if (times.empty()) throw std::invalid_argument("block-count experiment needs observation times");
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("observation times must be finite and >= 0");
  }
  BlockCountSetup s;
  s.base = make_pair_time_setup(regime, L, small, large, seed);
  s.base.n = n;
  s.base.horizon = *std::max_element(times.begin(), times.end()) * s.base.phi;
  s.times = std::move(times);
  s.large = large;
  return s;
}

std::vector<int> block_count_replicate(const BlockCountSetup& setup, std::size_t replicate) {
  const auto& b = setup.base;
  const int n = static_cast<int>(b.n);
  std::vector<int> counts(setup.times.size(), n);
  if (!std::isfinite(b.phi) || !moves(b.law) || n == 1) return counts;
  const TorusSpec torus(b.L);
  Rng rng(genealogy_seed(b.seed, b.L, replicate));
  SimulationOptions opt;
  opt.horizon = b.horizon;
  opt.track_pairs = false;
  try {
    const auto rec = simulate_genealogy(SampleConfig{b.n, Placement::well_separated, {}}, b.law,
                                        torus, opt, rng);
    for (std::size_t i = 0; i < setup.times.size(); ++i) {
      const double t = setup.times[i] * b.phi;
      int c = n;
      for (const auto& e : rec.events) {
        if (e.time > t) break;
        c -= static_cast<int>(e.merged.size()) - 1;
      }
      counts[i] = c;
    }
  } catch (const SimulationTimeout&) {
    std::fill(counts.begin(), counts.end(), -1);
  }
  return counts;
}

BlockCountResult summarize_block_counts(const BlockCountSetup& setup,
                                        std::span<const std::vector<int>> counts) {
  BlockCountResult r;
  r.L = setup.base.L;
  r.phi = setup.base.phi;
  r.n = setup.base.n;
  r.times = setup.times;
  const int n = static_cast<int>(r.n);
  std::size_t valid = 0;
  for (const auto& c : counts) {
    if (!c.empty() && c[0] < 0) {
      ++r.censored;
    } else {
      ++valid;
    }
  }
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    std::vector<std::size_t> hist(n, 0);
    for (const auto& c : counts) {
      if (c[i] >= 1) ++hist[c[i] - 1];
    }
    std::vector<Proportion> row;
    for (int j = 0; j < n; ++j) row.push_back(proportion(hist[j], valid));
    r.empirical.push_back(std::move(row));
  }
  const auto& cls = setup.base.regime;
  for (double t : r.times) {
    if (cls.kingman_limit()) {
      r.overlay.push_back(kingman_block_distribution(n, t));
    } else if (cls.kind == TimescaleCase::lambda_coalescent && setup.large) {
      const double beta = 2.0 * std::numbers::pi * sigma2(setup.base.law.small) * cls.rho_over_l2logl;
      r.overlay.push_back(lambda_block_distribution(n, t, cls.c, beta, *setup.large));
    }
  }
  return r;
}

BlockCountResult block_count_experiment(std::size_t n, const RegimeSpec& regime, double L,
                                        std::vector<double> times, std::size_t replicates,
                                        const EventClass& small,
                                        const std::optional<EventClass>& large, std::uint64_t seed,
                                        unsigned threads) {
  const auto setup = make_block_count_setup(n, regime, L, std::move(times), small, large, seed);
  std::vector<std::vector<int>> counts(replicates);
  parallel_for(0, replicates, threads, [&](std::size_t i) { counts[i] = block_count_replicate(setup, i); });
  return summarize_block_counts(setup, counts);
}

// --- first mergers --------------------------------------------------------------------

FirstMergerSetup make_first_merger_setup(std::size_t n, double L, double c, double rho,
                                         const EventClass& large, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("first-merger experiment needs n >= 2");
  const double mass = large.radii.total_mass();
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::invalid_argument("large radius measure must have finite positive mass");
  }
  if (c * large.radii.max_radius() > TorusSpec(1.0).max_distance() * (1.0 + 1e-12)) {
    throw std::invalid_argument("c R^B exceeds 1/sqrt(2)");
  }
  if (!(rho > L * L) || !std::isfinite(rho)) {
    throw std::invalid_argument("first-merger experiment needs L^2 < rho_L < infinity");
  }
  FirstMergerSetup s;
  s.n = n;
  s.L = L;
  s.c = c;
  s.seed = seed;
  s.law.small = EventClass{RadiusMeasure(), ImpactDistribution::point(0.0)};
  s.law.large = large;
  s.law.psi = c * L;
  s.law.rho = rho;
  const int m = static_cast<int>(n);
  double total = 0.0;
  for (int k = 2; k <= m; ++k) {
    s.expected.push_back(binomial(m, k) * lambda_beta_c_rate(m, k, c, 0.0, large));
    total += s.expected.back();
  }
  if (!(total > 0.0)) throw std::invalid_argument("large events never merge two lineages");
  for (double& e : s.expected) e /= total;
  return s;
}

int first_merger_replicate(const FirstMergerSetup& setup, std::size_t replicate) {
  const TorusSpec torus(setup.L);
  Rng rng(derive_seed(setup.seed, stream_id("first-merger"), l_key(setup.L), replicate));
  std::vector<TorusPoint> labels;
  for (std::size_t i = 0; i < setup.n; ++i) labels.push_back(uniform_on_torus(torus, rng));
  SimulationOptions opt;
  opt.until_mrca = false;
  opt.track_pairs = false;
  opt.frozen = true;
  opt.homogenize = true;
  opt.stop_on_first_merger = true;
  try {
    const auto rec = simulate_genealogy(labels, setup.law, torus, opt, rng);
    if (rec.events.empty() || rec.events.back().merged.size() < 2) return -1;
    return static_cast<int>(rec.events.back().merged.size());
  } catch (const SimulationTimeout&) {
    return -1;
  }
}

FirstMergerResult summarize_first_mergers(const FirstMergerSetup& setup, std::span<const int> sizes) {
  FirstMergerResult r;
  r.expected = setup.expected;
  r.observed.assign(setup.expected.size(), 0.0);
  for (int k : sizes) {
    if (k >= 2) {
      r.observed[k - 2] += 1.0;
      ++r.mergers;
    }
  }
  r.inconclusive = r.mergers < 100;
  const double total = static_cast<double>(r.mergers);
  // Pool bins from the largest k down until each expected count reaches 5.
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0;
  for (std::size_t i = r.expected.size(); i-- > 0;) {
    o += r.observed[i];
    e += r.expected[i] * total;
    if (e >= 5.0 || i == 0) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (exp.size() > 1 && exp.back() < 5.0) {
    obs[obs.size() - 2] += obs.back();
    exp[exp.size() - 2] += exp.back();
    obs.pop_back();
    exp.pop_back();
  }
  r.dof = static_cast<int>(obs.size()) - 1;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (exp[i] > 0.0) r.chi_square += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  }
  if (r.dof <= 0 || total == 0.0) {
    r.p_value = 1.0;
  } else {
    const boost::math::chi_squared dist(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.chi_square));
  }
  return r;
}

FirstMergerResult first_merger_distribution(std::size_t n, double L, double c, double rho,
                                            const EventClass& large, std::size_t mergers,
                                            std::uint64_t seed, unsigned threads) {
  const auto setup = make_first_merger_setup(n, L, c, rho, large, seed);
  std::vector<int> sizes(mergers);
  parallel_for(0, mergers, threads, [&](std::size_t i) { sizes[i] = first_merger_replicate(setup, i); });
  return summarize_first_mergers(setup, sizes);
}

// --- hitting times -----------------------------------------------------------------------

HittingSetup make_hitting_setup(const EventClass& small, double L, const PowerLaw& target,
                                std::optional<TorusPoint> start, std::uint64_t seed) {
  HittingSetup s;
  s.L = L;
  EventLaw law;
  law.small = small;
  check_admissibility(law);
  const TorusSpec torus(L);
  s.driver = std::make_shared<const EventDriver>(law, torus);
  s.radius = target(L);
  if (!(s.radius >= 0.0)) throw std::invalid_argument("target radius must be non-negative");
  s.gamma = std::max(0.0, target.power);
  if (s.gamma >= 1.0) throw std::invalid_argument("target radius must grow slower than L");
  const double sig = sigma2(small);
  if (!(sig > 0.0)) throw std::invalid_argument("the lineage never moves");
  s.normalization = (1.0 - s.gamma) * l2logl(L) / (std::numbers::pi * sig);
  s.horizon = 50.0 * s.normalization;
  if (start) {
    s.start = torus.canonical(*start);
    check_start(torus, *s.start, s.radius);
  }
  s.seed = seed;
  return s;
}

double hitting_replicate(const HittingSetup& setup, std::size_t replicate) {
  const auto& torus = setup.driver->torus();
  Rng rng(derive_seed(setup.seed, stream_id("hitting"), l_key(setup.L), replicate));
  const TorusPoint start = setup.start ? *setup.start : gamma1_start(torus, rng);
  const auto res = first_entrance(*setup.driver, start, setup.radius, setup.horizon, rng);
  return res.entered ? res.time / setup.normalization : kNever;
}

HittingResult summarize_hitting(const HittingSetup& setup, std::span<const double> normalized) {
  HittingResult r;
  r.L = setup.L;
  r.normalization = setup.normalization;
  r.normalized.assign(normalized.begin(), normalized.end());
  r.censored = static_cast<std::size_t>(
      std::count_if(normalized.begin(), normalized.end(), [](double t) { return !std::isfinite(t); }));
  r.ks = ks_or_nan(normalized);
  return r;
}

HittingExperiment hitting_time_experiment(const EventClass& small, std::span<const double> ls,
                                          const PowerLaw& target, std::size_t replicates,
                                          std::uint64_t seed, unsigned threads) {
  HittingExperiment exp;
  std::vector<double> ks;
  for (double L : ls) {
    const auto setup = make_hitting_setup(small, L, target, std::nullopt, seed);
    std::vector<double> t(replicates);
    parallel_for(0, replicates, threads, [&](std::size_t i) { t[i] = hitting_replicate(setup, i); });
    exp.per_l.push_back(summarize_hitting(setup, t));
    ks.push_back(exp.per_l.back().ks);
  }
  exp.trend = weak_trend(std::move(ks), ks_noise_band(replicates));
  return exp;
}

UniformizationResult uniformization_check(const EventClass& small, double L, double d,
                                          double factor, std::size_t replicates,
                                          std::uint64_t seed, unsigned threads) {
  EventLaw law;
  law.small = small;
  const TorusSpec torus(L);
  const EventDriver driver(law, torus);
  const double t = factor * L * L;
  std::vector<char> inside(replicates, 0);
  parallel_for(0, replicates, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, stream_id("uniformization"), l_key(L), i));
    const TorusPoint p = lineage_position(driver, {torus.half() * 0.999, torus.half() * 0.999}, t, rng);
    inside[i] = torus.distance_sq(p, {0.0, 0.0}) <= d * d;
  });
  UniformizationResult r;
  r.inside = proportion(static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1)), replicates);
  r.expected = torus_ball_volume(d, torus) / torus.area();
  const double se = std::sqrt(r.expected * (1.0 - r.expected) / static_cast<double>(replicates));
  r.within_3_sigma = std::abs(r.inside.estimate - r.expected) <= 3.0 * se;
  return r;
}

WindowSetup make_window_setup(const EventClass& small, double L, double R, double window_end,
                              double window_length, std::optional<TorusPoint> start,
                              std::uint64_t seed) {
  if (R < 0.0 || window_length < 0.0) throw std::invalid_argument("R and u_L must be non-negative");
  if (window_length > window_end) throw std::invalid_argument("window longer than U'_L");
  if (2.0 * window_length > L * L / std::sqrt(std::log(L)) * (1.0 + 1e-12)) {
    throw std::invalid_argument("window length must satisfy 2 u_L <= L^2 (log L)^(-1/2)");
  }
  WindowSetup s;
  s.L = L;
  EventLaw law;
  law.small = small;
  check_admissibility(law);
  const TorusSpec torus(L);
  s.driver = std::make_shared<const EventDriver>(law, torus);
  s.radius = R;
  s.window_end = window_end;
  s.window_length = window_length;
  if (start) {
    s.start = torus.canonical(*start);
    check_start(torus, *s.start, R);
  }
  s.seed = seed;
  return s;
}

int window_replicate(const WindowSetup& setup, std::size_t replicate) {
  if (setup.radius == 0.0 || setup.window_length == 0.0) return 0;
  const auto& torus = setup.driver->torus();
  Rng rng(derive_seed(setup.seed, stream_id("window"), l_key(setup.L), replicate));
  const TorusPoint start = setup.start ? *setup.start : gamma1_start(torus, rng);
  const auto res = first_entrance(*setup.driver, start, setup.radius, setup.window_end, rng);
  return res.entered && res.time >= setup.window_end - setup.window_length ? 1 : 0;
}

WindowResult summarize_window(const WindowSetup& setup, std::span<const int> hits) {
  WindowResult r;
  r.L = setup.L;
  r.probability = proportion(static_cast<std::size_t>(std::count(hits.begin(), hits.end(), 1)), hits.size());
  r.bound_scale = setup.window_length / (setup.L * setup.L);
  r.ratio = r.bound_scale > 0.0 ? r.probability.estimate / r.bound_scale : 0.0;
  return r;
}

WindowResult short_window_entrance(const EventClass& small, double L, double R, double window_end,
                                   double window_length, std::size_t replicates,
                                   std::optional<TorusPoint> start, std::uint64_t seed,
                                   unsigned threads) {
  const auto setup = make_window_setup(small, L, R, window_end, window_length, start, seed);
  std::vector<int> hits(replicates);
  parallel_for(0, replicates, threads, [&](std::size_t i) { hits[i] = window_replicate(setup, i); });
  return summarize_window(setup, hits);
}

}  // namespace slfv
