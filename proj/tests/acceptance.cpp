// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "slfv/coalescent.hpp"
#include "slfv/event_model.hpp"
#include "slfv/forward.hpp"
#include "slfv/parallel.hpp"
#include "slfv/stats.hpp"
#include "slfv/torus.hpp"

using namespace slfv;

namespace {

constexpr std::uint64_t kSeed = 20240611;

unsigned threads() {
  if (const char* t = std::getenv("SLFV_THREADS")) return resolve_threads(std::strtoul(t, nullptr, 10));
  return resolve_threads(0);
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

EventClass point_class(double r, double u) {
  return {RadiusMeasure::point(r), ImpactDistribution::point(u)};
}

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

// --- criteria 1 and 2 share one experiment -------------------------------------

const PairTimeExperiment& small_pair_experiment() {
  static const PairTimeExperiment exp = [] {
    const RegimeSpec regime{{1, 0, 0}, std::nullopt};
    const std::vector<double> ls{64, 128, 256};
    return pair_time_experiment(regime, ls, 2000, point_class(1, 1), std::nullopt, kSeed, threads());
  }();
  return exp;
}

std::string ks_list(const PairTimeExperiment& exp, bool gathering) {
  std::string s;
  for (const auto& r : exp.per_l) {
    s += fmt("%s%g:%.4f", s.empty() ? "" : " ", r.L, gathering ? r.ks_gathering : r.ks_coalescence);
  }
  return s;
}

Verdict criterion1() {
  const auto& exp = small_pair_experiment();
  const double ks = exp.per_l.back().ks_gathering;
  std::size_t censored = 0;
  for (const auto& r : exp.per_l) censored += r.censored;
  const bool pass = exp.gathering_trend.weakly_decreasing && ks < 0.12 && censored == 0;
  return {pass, fmt("KS by L {%s}, band %.4f, weakly decreasing %s, KS(256) %.4f < 0.12, censored %zu",
                    ks_list(exp, true).c_str(), exp.gathering_trend.band,
                    exp.gathering_trend.weakly_decreasing ? "yes" : "no", ks, censored)};
}

Verdict criterion2() {
  const auto& r = small_pair_experiment().per_l.back();
  const bool pass = r.mean_coalescence >= 0.75 && r.mean_coalescence <= 1.25 && r.ks_coalescence < 0.15 &&
                    r.censored == 0;
  return {pass, fmt("L=256: mean %.4f in [0.75,1.25], KS %.4f < 0.15, censored %zu", r.mean_coalescence,
                    r.ks_coalescence, r.censored)};
}

Verdict criterion3() {
  struct Case {
    const char* name;
    RegimeSpec regime;
  };
  const std::vector<Case> cases{{"psi=L^1/2 rho=L^1/4", {{1, 0.5, 0}, PowerLaw{1, 0.25, 0}}},
                                {"psi=L^1/2 rho=L", {{1, 0.5, 0}, PowerLaw{1, 1, 0}}}};
  const std::vector<double> ls{64, 128, 256};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto cls = classify(c.regime);
    const auto exp = pair_time_experiment(c.regime, ls, 2000, point_class(1, 1), point_class(1, 1), kSeed + 3,
                                          threads());
    const auto& last = exp.per_l.back();
    const bool ok = exp.coalescence_trend.weakly_decreasing && last.ks_coalescence < 0.15 && last.censored == 0;
    pass = pass && ok;
    detail += fmt("%s[%s, %s b=%g] KS {%s} trend %s, KS(256) %.4f < 0.15, mean %.3f", detail.empty() ? "" : "; ",
                  c.name, std::string(to_string(cls.kind)).c_str(), cls.b, ks_list(exp, false).c_str(),
                  exp.coalescence_trend.weakly_decreasing ? "ok" : "broken", last.ks_coalescence,
                  last.mean_coalescence);
  }
  return {pass, detail};
}

Verdict criterion4() {
  const double L = 128.0;
  const double rho = L * L * std::pow(std::log(L), 2);
  const auto res = first_merger_distribution(4, L, 1.0, rho, point_class(0.25, 0.5), 10000, kSeed + 4, threads());
  std::string bins;
  for (std::size_t i = 0; i < res.observed.size(); ++i) {
    bins += fmt("%sk=%zu %g/%.1f", bins.empty() ? "" : " ", i + 2, res.observed[i], res.expected[i] * res.mergers);
  }
  const bool pass = res.mergers >= 10000 && res.p_value > 0.001;
  return {pass, fmt("%zu mergers, observed/expected {%s}, chi2 %.3f dof %d, p %.4f > 0.001", res.mergers,
                    bins.c_str(), res.chi_square, res.dof, res.p_value)};
}

Verdict criterion5() {
  const RegimeSpec regime{{1, 0, 0}, std::nullopt};
  const std::vector<double> times{0.1, 0.3, 0.5};
  const std::size_t reps = 2000;
  const auto res = block_count_experiment(4, regime, 256, times, reps, point_class(1, 1), std::nullopt,
                                          kSeed + 5, threads());
  bool pass = res.censored == 0;
  std::string detail;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double p = std::exp(-6.0 * times[i]);
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(reps));
    const double est = res.empirical[i][3].estimate;
    const bool ok = std::abs(est - p) <= 3 * sigma;
    pass = pass && ok;
    detail += fmt("%st=%.1f P[4]=%.4f vs %.4f (|z|=%.2f)", detail.empty() ? "" : ", ", times[i], est, p,
                  std::abs(est - p) / sigma);
  }
  return {pass, detail + fmt(", censored %zu", res.censored)};
}

Verdict criterion6() {
  const auto field = TypeField::checkerboard(8.0, 32, 8);
  EventLaw law;
  law.small = point_class(1.0, 0.5);
  const std::vector<TorusPoint> points{{-0.125, -0.125}, {0.875, -0.125}};
  const std::vector<std::vector<int>> patterns{{0, 1}, {0, 0}, {1, 1}};
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    DualityRequest req;
    req.points = points;
    req.types = patterns[i];
    req.time = 1.0;
    req.replicates = 100000;
    req.seed = kSeed + 60 + i;
    req.threads = threads();
    const auto rep = duality_check(field, req, law);
    pass = pass && rep.overlap;
    detail += fmt("%s(%d,%d) fwd %.4f [%.4f,%.4f] dual %.4f [%.4f,%.4f]", detail.empty() ? "" : "; ", patterns[i][0],
                  patterns[i][1], rep.forward.mean, rep.forward.lower, rep.forward.upper, rep.dual.mean,
                  rep.dual.lower, rep.dual.upper);
  }
  return {pass, detail};
}

// --- criterion 7: closed forms against Monte Carlo and brute force ----------------

Verdict criterion7() {
  std::vector<std::string> failures;
  std::string detail;
  auto check = [&](const std::string& name, double value, double oracle, double tol) {
    const bool ok = close_rel(value, oracle, tol);
    if (!ok) failures.push_back(name);
    detail += fmt("%s%s %.5g/%.5g", detail.empty() ? "" : ", ", name.c_str(), value, oracle);
  };
  Rng rng(kSeed + 7);
  const int n = 1000000;

  // Lens area: hit-or-miss on the box [d - 1, 1] x [-1, 1] around the lens.
  const TorusSpec plane(100.0);
  for (double d : {0.3, 1.0, 1.7}) {
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const double x = d - 1.0 + (2.0 - d) * rng.uniform(), y = 2 * rng.uniform() - 1;
      hits += x * x + y * y < 1.0 && (x - d) * (x - d) + y * y < 1.0;
    }
    check(fmt("lens(d=%.1f)", d), lens_area(d, 1.0), 2.0 * (2.0 - d) * hits / n, 0.01);
  }

  // Torus ball volume, including radii above L/2.
  const TorusSpec t4(4.0);
  for (double r : {1.0, 2.5, 2.8}) {
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += t4.distance_sq(uniform_on_torus(t4, rng), {0, 0}) < r * r;
    check(fmt("V_T(r=%.1f)", r), torus_ball_volume(r, t4), t4.area() * hits / n, 0.01);
  }

  // Dispersal variance: simulate jumps with radius atoms and a Beta impact.
  EventLaw law;
  law.small = EventClass{RadiusMeasure({{0.5, 1.0}, {1.0, 2.0}}), ImpactDistribution::beta(2.0, 3.0)};
  {
    // Jump radius chosen with weight r^2 mu(dr) E[u]; u independent of r here.
    const double w1 = 0.25 * 1.0, w2 = 1.0 * 2.0;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = rng.uniform() * (w1 + w2) < w1 ? 0.5 : 1.0;
      const TorusPoint c = uniform_in_ball({0, 0}, r, plane, rng);
      const TorusPoint l = uniform_in_ball(c, r, plane, rng);
      s += 0.5 * (l.x * l.x + l.y * l.y);
    }
    const double rate = single_lineage_jump_rate(law, EventScale::small);
    check("sigma^2", dispersal_variance(law, EventScale::small), s / n * rate, 0.02);
  }

  // Pair coalescence rate: event centres uniform on the box [d - 1, 1] x [-1, 1]
  // holding every lens, both points hit, both affected with probability u^2.
  for (double d : {0.5, 1.5}) {
    const double box = 2.0 * (2.0 - d);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = rng.uniform() * 3.0 < 1.0 ? 0.5 : 1.0;
      const double x = d - 1.0 + (2.0 - d) * rng.uniform(), y = 2 * rng.uniform() - 1;
      if (x * x + y * y < r * r && (x - d) * (x - d) + y * y < r * r) {
        const double u = law.small.impact.at(r).sample(rng);
        acc += u * u;
      }
    }
    const double mc = 3.0 * box * acc / n;  // total radius mass 3
    check(fmt("pair(d=%.1f)", d), pair_coalescence_rate(d, law, EventScale::small), mc, 0.02);
  }

  // lambda^(beta,c)_{m,k}: uniform labels on T(1), one event per draw.
  {
    const EventClass large{RadiusMeasure({{0.3, 1.0}, {0.4, 1.0}}), ImpactDistribution::beta(2.0, 2.0)};
    const double c = 1.2, beta = 0.7;
    const int m = 4;
    const TorusSpec unit(1.0);
    const int draws = 4 * n;
    std::vector<double> count(m + 1, 0.0);
    for (int i = 0; i < draws; ++i) {
      const double r = c * (rng.uniform() < 0.5 ? 0.3 : 0.4);
      const double u = large.impact.at(r).sample(rng);
      const TorusPoint z = uniform_on_torus(unit, rng);
      int k = 0;
      for (int b = 0; b < m; ++b) {
        const bool inside = unit.distance_sq(uniform_on_torus(unit, rng), z) < r * r;
        k += inside && rng.uniform() < u;
      }
      count[k] += 1.0;
    }
    const double total_rate = 2.0 / (c * c);
    for (int k = 2; k <= m; ++k) {
      const double sets = std::tgamma(m + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(m - k + 1.0));
      const double mc = total_rate * count[k] / draws / sets + (k == 2 ? beta : 0.0);
      check(fmt("lambda(4,%d)", k), lambda_beta_c_rate(m, k, c, beta, large), mc, 0.03);
    }
  }

  // beta_{p,j} = beta_{p+1,j} + beta_{p+1,j+1}.
  double worst = 0.0;
  for (const auto& lam : {LambdaMeasure::kingman(), LambdaMeasure::lebesgue(), LambdaMeasure::beta(2.0, 2.0)}) {
    for (int p = 2; p <= 9; ++p) {
      for (int j = 2; j <= p; ++j) {
        worst = std::max(worst, std::abs(nonspatial_lambda_rate(p, j, lam) - nonspatial_lambda_rate(p + 1, j, lam) -
                                         nonspatial_lambda_rate(p + 1, j + 1, lam)));
      }
    }
  }
  if (!(worst <= 1e-6)) failures.push_back("consistency");
  detail += fmt(", recursion max error %.2e", worst);
  std::string failed;
  for (const auto& f : failures) failed += " " + f;
  return {failures.empty(), detail + (failures.empty() ? "" : "; failed:" + failed)};
}

// --- criterion 8: structural invariants on randomized trajectories ------------------

Verdict criterion8() {
  const std::size_t trials = 10000;
  std::vector<std::string> problems(trials);
  parallel_for(0, trials, threads(), [&](std::size_t trial) {
    Rng rng(derive_seed(kSeed + 8, stream_id("structural"), trial));
    const std::size_t n = 2 + rng.index(6);
    const double L = 3.0 + 5.0 * rng.uniform();
    const TorusSpec torus(L);
    EventLaw law;
    const double r1 = 0.3 + 0.9 * rng.uniform();
    RadiusMeasure radii = rng.uniform() < 0.5 ? RadiusMeasure::point(r1)
                                              : RadiusMeasure({{r1, 1.0}, {0.5 * r1, 0.5 + rng.uniform()}});
    ImpactDistribution impact = rng.uniform() < 0.5 ? ImpactDistribution::point(0.2 + 0.8 * rng.uniform())
                                                    : ImpactDistribution::beta(0.5 + 2 * rng.uniform(), 0.5 + 2 * rng.uniform());
    law.small = EventClass{radii, impact};
    if (rng.uniform() < 0.3) {
      law.large = point_class(0.5, 0.3 + 0.7 * rng.uniform());
      law.psi = 1.0 + rng.uniform() * std::min(1.5, 0.9 * L / 1.5);
      law.rho = 2.0 + 10 * rng.uniform();
    }
    std::vector<TorusPoint> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(uniform_on_torus(torus, rng));
    SimulationOptions opt;
    opt.record_drive = true;
    opt.gathering_thresholds = {1.0};
    std::string& why = problems[trial];
    try {
      const auto rec = simulate_genealogy(pts, law, torus, opt, rng);
      auto state = LabelledPartition::singletons(rec.initial_labels);
      for (const auto& e : rec.events) {
        std::vector<std::size_t> which;
        for (const auto& m : e.merged) {
          const auto it = std::find_if(state.blocks().begin(), state.blocks().end(),
                                       [&](const Block& b) { return b.members == m; });
          if (it == state.blocks().end()) {
            why = "merged block not in state";
            return;
          }
          which.push_back(static_cast<std::size_t>(it - state.blocks().begin()));
        }
        const std::size_t before = state.size();
        state.merge(which, e.label);
        state.validate(torus);
        if (state.size() != before + 1 - which.size() || (which.size() >= 2 && state.size() >= before)) {
          why = "block count not monotone";
          return;
        }
      }
      if (state.canonical() != rec.final_state.canonical() || !rec.reached_mrca) {
        why = "final state mismatch";
        return;
      }
      // Permutation equivariance.
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
      std::vector<int> inverse(n);
      std::vector<TorusPoint> permuted_pts;
      for (std::size_t i = 0; i < n; ++i) {
        inverse[perm[i]] = static_cast<int>(i);
        permuted_pts.push_back(rec.initial_labels[perm[i]]);
      }
      const auto permuted = replay(permuted_pts, rec.drive, torus, opt);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          if (permuted.coalescence_time(inverse[i], inverse[j]) != rec.coalescence_time(i, j) ||
              permuted.gathering_time(0, inverse[i], inverse[j]) != rec.gathering_time(0, i, j)) {
            why = "permutation changed pair times";
            return;
          }
        }
      }
      // Sampling consistency.
      std::vector<int> sub;
      for (std::size_t i = 0; i < n; ++i) {
        if (rng.uniform() < 0.6) sub.push_back(static_cast<int>(i));
      }
      if (sub.empty()) sub.push_back(0);
      std::sort(sub.begin(), sub.end());
      SimulationOptions partial = opt;
      partial.until_mrca = false;
      std::vector<TorusPoint> sub_pts;
      for (int i : sub) sub_pts.push_back(rec.initial_labels[i]);
      if (!structurally_equal(restrict(rec, sub), replay(sub_pts, rec.drive, torus, partial))) {
        why = "restriction differs from subsample replay";
      }
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
  });
  std::size_t bad = 0;
  std::string first;
  for (std::size_t i = 0; i < trials; ++i) {
    if (!problems[i].empty()) {
      if (bad == 0) first = fmt(" (trial %zu: %s)", i, problems[i].c_str());
      ++bad;
    }
  }
  return {bad == 0, fmt("%zu trajectories, %zu violations%s", trials, bad, first.c_str())};
}

// --- criterion 9: thinning --------------------------------------------------------

Verdict criterion9() {
  const double r = 1.0, L = 16.0;
  const TorusSpec torus(L);
  EventLaw law;
  law.small = point_class(r, 1.0);
  bool pass = true;
  std::string detail;
  for (double d : {0.0, r, 1.9 * r, 2.5 * r}) {
    const double exact = 2 * std::numbers::pi * r * r - lens_area(d, r);
    SimulationOptions opt;
    opt.frozen = true;
    opt.until_mrca = false;
    opt.track_pairs = false;
    opt.horizon = 1e5 / exact;
    Rng rng(derive_seed(kSeed + 9, stream_id("thinning"), static_cast<std::uint64_t>(d * 10)));
    const std::vector<TorusPoint> pts{{0, 0}, {d, 0}};
    const auto rec = simulate_genealogy(pts, law, torus, opt, rng);
    const double rate = static_cast<double>(rec.accepted_events) / rec.end_time;
    const bool ok = close_rel(rate, exact, 0.02);
    pass = pass && ok;
    detail += fmt("%sd=%.1f: %llu events, rate %.4f vs %.4f", detail.empty() ? "" : "; ", d,
                  static_cast<unsigned long long>(rec.accepted_events), rate, exact);
  }
  return {pass, detail};
}

// --- criterion 10: short-window entrance --------------------------------------------

Verdict criterion10() {
  const std::vector<std::pair<double, std::size_t>> plan{{64, 10000}, {128, 10000}, {256, 10000}};
  std::vector<double> ratios;
  std::string detail;
  for (const auto& [L, reps] : plan) {
    const double logl = std::log(L);
    const double u = L * L / (2 * logl);
    const double end = L * L * std::sqrt(logl);
    const auto res = short_window_entrance(point_class(1, 1), L, 2.0, end, u, reps, std::nullopt,
                                           kSeed + 10, threads());
    ratios.push_back(res.ratio);
    detail += fmt("%sL=%g: P=%.5f (se %.5f), ratio %.4f", detail.empty() ? "" : "; ", L,
                  res.probability.estimate, res.probability.std_error, res.ratio);
  }
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  const bool pass = lo > 0.0 && hi / lo <= 3.0;
  return {pass, detail + fmt("; max/min %.3f <= 3", lo > 0 ? hi / lo : INFINITY)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"exponential pair gathering", criterion1},
      {"pair coalescence time", criterion2},
      {"regime-case timescales", criterion3},
      {"first-merger law", criterion4},
      {"Kingman block count", criterion5},
      {"duality", criterion6},
      {"exact oracles", criterion7},
      {"structural invariants", criterion8},
      {"thinning exactness", criterion9},
      {"short-window entrance", criterion10},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
