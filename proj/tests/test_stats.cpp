#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slfv/errors.hpp"
#include "slfv/stats.hpp"

using namespace slfv;

namespace {

EventClass point_class(double r, double u) {
  return {RadiusMeasure::point(r), ImpactDistribution::point(u)};
}

RegimeSpec regime(PowerLaw psi, std::optional<PowerLaw> rho) { return {psi, rho}; }

double l2logl(double L) { return L * L * std::log(L); }

}  // namespace

TEST(Classify, Cases) {
  EXPECT_EQ(classify(regime({1, 0.5, 0}, PowerLaw{1, 0.25, 0})).kind, TimescaleCase::large_gathering);
  const auto b = classify(regime({1, 0.5, 0}, PowerLaw{1, 1, 0}));
  EXPECT_EQ(b.kind, TimescaleCase::mixed_gathering);
  EXPECT_DOUBLE_EQ(b.b, 1.0);
  const auto b0 = classify(regime({1, 0.5, 0}, PowerLaw{1, 1, 0.5}));
  EXPECT_EQ(b0.kind, TimescaleCase::mixed_gathering);
  EXPECT_DOUBLE_EQ(b0.b, 0.0);
  EXPECT_EQ(classify(regime({1, 0.5, 0}, PowerLaw{1, 3, 0})).kind, TimescaleCase::small_gathering);
  EXPECT_EQ(classify(regime({1, 0.5, 0}, std::nullopt)).kind, TimescaleCase::small_gathering);
  EXPECT_EQ(classify(regime({1, 0, 0}, PowerLaw{1, 0.5, 0})).kind, TimescaleCase::small_gathering);

  const auto sp = classify(regime({0.5, 1, 0}, PowerLaw{3, 2, 0}));
  EXPECT_EQ(sp.kind, TimescaleCase::spatial_limit);
  EXPECT_DOUBLE_EQ(sp.b, 3.0);
  EXPECT_DOUBLE_EQ(sp.c, 0.5);
  const auto lam = classify(regime({0.5, 1, 0}, PowerLaw{2, 2, 1}));
  EXPECT_EQ(lam.kind, TimescaleCase::lambda_coalescent);
  EXPECT_DOUBLE_EQ(lam.rho_over_l2logl, 2.0);
  const auto lam0 = classify(regime({0.5, 1, 0}, PowerLaw{1, 2, 0.5}));
  EXPECT_EQ(lam0.kind, TimescaleCase::lambda_coalescent);
  EXPECT_DOUBLE_EQ(lam0.rho_over_l2logl, 0.0);
  EXPECT_EQ(classify(regime({1, 1, 0}, PowerLaw{1, 2, 2})).kind, TimescaleCase::kingman);
}

TEST(Classify, UncoveredRegimesThrow) {
  EXPECT_THROW(classify(regime({1, 1.5, 0}, PowerLaw{1, 1, 0})), UncoveredRegime);
  EXPECT_THROW(classify(regime({1, 0.5, 0}, PowerLaw{1, 0, 0})), UncoveredRegime);
  EXPECT_THROW(classify(regime({1, 1, 1}, PowerLaw{1, 3, 0})), UncoveredRegime);
  // psi^2 log L / rho bounded but psi^4 / rho unbounded and rho << L^2 log L.
  EXPECT_THROW(classify(regime({1, 0.5, 0}, PowerLaw{1, 1, 1})), UncoveredRegime);
}

TEST(Classify, AgreesWithNumericalRatios) {
  // Exponent pairs on a grid; compare against the ratios evaluated at huge L.
  const double L1 = 1e40, L2 = 1e80;
  auto grows = [&](auto f) { return f(L2) / f(L1) > 10.0; };
  for (double p = 0.0; p < 0.99; p += 0.125) {
    for (double P = 0.125; P <= 3.0; P += 0.125) {
      const RegimeSpec r{{1, p, 0}, PowerLaw{1, P, 0}};
      auto psi2_rho = [&](double L) { return std::pow(L, 2 * p - P); };
      auto psi4_rho = [&](double L) { return std::pow(L, 4 * p - P); };
      auto l2_rho = [&](double L) { return std::pow(L, 2 - P); };
      const bool a = grows(psi2_rho);
      const bool bounded4 = !grows(psi4_rho) && !(std::abs(4 * p - P) < 1e-12 ? false : 4 * p > P);
      const bool l2small = P > 2.0;
      if (a) {
        EXPECT_EQ(classify(r).kind, TimescaleCase::large_gathering) << p << " " << P;
      } else if (std::abs(2 * p - P) < 1e-12) {
        EXPECT_EQ(classify(r).kind, TimescaleCase::mixed_gathering) << p << " " << P;
      } else if (bounded4 || l2small) {
        EXPECT_EQ(classify(r).kind, TimescaleCase::small_gathering) << p << " " << P;
      } else {
        EXPECT_THROW(classify(r), UncoveredRegime) << p << " " << P;
      }
    }
  }
}

TEST(PredictedTimescale, CaseFormulas) {
  const auto small = point_class(1.0, 1.0);
  const auto large = point_class(1.0, 1.0);
  const double L = 100.0;
  const double s2 = std::numbers::pi / 2.0 * 1.0;  // (pi/2) r^4 u with r = u = 1
  const double psi = std::sqrt(L), rho = std::pow(L, 0.25);
  EXPECT_NEAR(predicted_timescale(regime({1, 0.5, 0}, PowerLaw{1, 0.25, 0}), L, small, large),
              0.5 * rho * l2logl(L) / (2 * std::numbers::pi * s2 * psi * psi), 1e-9);
  EXPECT_NEAR(predicted_timescale(regime({1, 0.5, 0}, PowerLaw{1, 1, 0}), L, small, large),
              0.5 * l2logl(L) / (2 * std::numbers::pi * (s2 + s2)), 1e-9);
  EXPECT_NEAR(predicted_timescale(regime({1, 0.5, 0}, std::nullopt), L, small, std::nullopt),
              l2logl(L) / (2 * std::numbers::pi * s2), 1e-9);
  EXPECT_NEAR(predicted_timescale(regime({1, 1, 0}, PowerLaw{2, 2, 0}), L, small, large),
              2 * L * L, 1e-9);
  EXPECT_DOUBLE_EQ(gathering_threshold(regime({1, 0.5, 0}, PowerLaw{1, 0.25, 0}), L, small, large),
                   2 * psi);
  EXPECT_DOUBLE_EQ(gathering_threshold(regime({1, 0.5, 0}, PowerLaw{1, 3, 0}), L, small, large), 2.0);
}

TEST(BlockDistribution, KingmanClosedForm) {
  const auto p = kingman_block_distribution(4, 0.3);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_NEAR(p[3], std::exp(-1.8), 1e-10);
  double total = 0.0;
  for (double x : p) total += x;
  EXPECT_NEAR(total, 1.0, 1e-10);
  const auto two = kingman_block_distribution(2, 0.7);
  EXPECT_NEAR(two[1], std::exp(-0.7), 1e-12);
  // Three blocks: P[3] = e^{-3t}, P[2] = (3/2)(e^{-t} - e^{-3t}).
  const auto three = kingman_block_distribution(3, 0.4);
  EXPECT_NEAR(three[2], std::exp(-1.2), 1e-10);
  EXPECT_NEAR(three[1], 1.5 * (std::exp(-0.4) - std::exp(-1.2)), 1e-10);
}

TEST(BlockDistribution, LambdaWithoutMultipleMergersIsKingman) {
  const auto large = point_class(0.25, 0.0);
  const auto a = lambda_block_distribution(5, 0.6, 1.0, 1.0, large);
  const auto b = kingman_block_distribution(5, 0.6);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-10);
  const auto c = lambda_block_distribution(5, 0.6, 1.0, 0.5, point_class(0.25, 0.5));
  double total = 0.0;
  for (double x : c) {
    EXPECT_GE(x, 0.0);
    total += x;
  }
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(Helpers, TrendAndProportion) {
  EXPECT_TRUE(weak_trend({0.3, 0.31, 0.2}, 0.02).weakly_decreasing);
  EXPECT_FALSE(weak_trend({0.3, 0.4}, 0.02).weakly_decreasing);
  EXPECT_NEAR(ks_noise_band(100), 0.163, 1e-12);
  const auto p = proportion(25, 100);
  EXPECT_DOUBLE_EQ(p.estimate, 0.25);
  EXPECT_NEAR(p.std_error, std::sqrt(0.25 * 0.75 / 100), 1e-15);
}

TEST(PairTimes, BlockCountForTwoMatchesPairTime) {
  const auto small = point_class(1.0, 1.0);
  const RegimeSpec r{{1, 0.5, 0}, std::nullopt};
  const double L = 10.0;
  const auto pair = make_pair_time_setup(r, L, small, std::nullopt, 17);
  const std::vector<double> times{0.2, 0.5, 1.0};
  const auto blocks = make_block_count_setup(2, r, L, times, small, std::nullopt, 17);
  for (std::size_t rep = 0; rep < 40; ++rep) {
    const auto s = pair_time_replicate(pair, rep);
    const auto c = block_count_replicate(blocks, rep);
    for (std::size_t i = 0; i < times.size(); ++i) {
      EXPECT_EQ(c[i], s.coalescence <= times[i] * pair.phi ? 1 : 2) << rep << " " << i;
    }
    EXPECT_LE(s.gathering, s.coalescence);
  }
}

TEST(PairTimes, NonCoalescingLawIsReported) {
  const RegimeSpec r{{1, 0.5, 0}, std::nullopt};
  const double ls[] = {10.0};
  const auto exp = pair_time_experiment(r, ls, 5, point_class(1.0, 0.0), std::nullopt, 3, 1);
  ASSERT_EQ(exp.per_l.size(), 1u);
  EXPECT_TRUE(exp.per_l[0].non_coalescing);
  EXPECT_EQ(exp.per_l[0].censored, 5u);
}

TEST(PairTimes, Deterministic) {
  const RegimeSpec r{{1, 0.5, 0}, std::nullopt};
  const auto setup = make_pair_time_setup(r, 12.0, point_class(1.0, 1.0), std::nullopt, 99);
  const auto a = pair_time_replicate(setup, 3);
  const auto b = pair_time_replicate(setup, 3);
  EXPECT_EQ(a.coalescence, b.coalescence);
  EXPECT_EQ(a.gathering, b.gathering);
}

TEST(FirstMerger, TwoLineagesAlwaysPairs) {
  const auto large = point_class(0.25, 0.5);
  const auto res = first_merger_distribution(2, 16.0, 1.0, 16.0 * 16.0 * 10, large, 50, 1, 1);
  EXPECT_EQ(res.mergers, 50u);
  EXPECT_DOUBLE_EQ(res.observed[0], 50.0);
  EXPECT_DOUBLE_EQ(res.p_value, 1.0);
  EXPECT_TRUE(res.inconclusive);
}

TEST(FirstMerger, Preconditions) {
  const auto large = point_class(0.25, 0.5);
  EXPECT_THROW(make_first_merger_setup(4, 16.0, 1.0, 100.0, large, 1), std::invalid_argument);
  EXPECT_THROW(make_first_merger_setup(4, 16.0, 4.0, 1e4, large, 1), std::invalid_argument);
  EXPECT_THROW(make_first_merger_setup(1, 16.0, 1.0, 1e4, large, 1), std::invalid_argument);
  const auto s = make_first_merger_setup(4, 16.0, 1.0, 1e4, large, 1);
  double total = 0.0;
  for (double e : s.expected) total += e;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(FirstMerger, ChiSquarePoolsSmallBins) {
  FirstMergerSetup s;
  s.expected = {0.9, 0.09, 0.01};
  std::vector<int> sizes(90, 2);
  sizes.insert(sizes.end(), 9, 3);
  sizes.push_back(4);
  const auto r = summarize_first_mergers(s, sizes);
  EXPECT_EQ(r.dof, 1);
  EXPECT_NEAR(r.chi_square, 0.0, 1e-12);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(Hitting, StartInsideTargetRejected) {
  const auto small = point_class(1.0, 1.0);
  EXPECT_THROW(make_hitting_setup(small, 50.0, PowerLaw{2, 0, 0}, TorusPoint{1.0, 0.0}, 1),
               std::invalid_argument);
  const auto s = make_hitting_setup(small, 50.0, PowerLaw{1, 0.5, 0}, std::nullopt, 1);
  EXPECT_DOUBLE_EQ(s.gamma, 0.5);
  EXPECT_NEAR(s.normalization, 0.5 * l2logl(50.0) / (std::numbers::pi * std::numbers::pi / 2), 1e-9);
  const double t = hitting_replicate(s, 0);
  EXPECT_GT(t, 0.0);
}

TEST(Window, DegenerateCasesGiveZero) {
  const auto small = point_class(1.0, 1.0);
  const double L = 20.0;
  const auto a = short_window_entrance(small, L, 0.0, 100.0, 10.0, 20, std::nullopt, 1, 1);
  EXPECT_EQ(a.probability.estimate, 0.0);
  const auto b = short_window_entrance(small, L, 2.0, 100.0, 0.0, 20, std::nullopt, 1, 1);
  EXPECT_EQ(b.probability.estimate, 0.0);
  EXPECT_THROW(make_window_setup(small, L, 2.0, 1e5, L * L, std::nullopt, 1), std::invalid_argument);
}

TEST(Uniformization, LongRunIsUniform) {
  const auto r = uniformization_check(point_class(1.0, 1.0), 12.0, 3.0, 10.0, 400, 5, 1);
  EXPECT_TRUE(r.within_3_sigma) << r.inside.estimate << " vs " << r.expected;
}
