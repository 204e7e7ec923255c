#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slfv/errors.hpp"
#include "slfv/event_model.hpp"
#include "slfv/torus.hpp"

using namespace slfv;

namespace {

EventLaw unit_law(double u = 1.0) {
  EventLaw law;
  law.small = {RadiusMeasure::point(1.0), ImpactDistribution::point(u)};
  return law;
}

double beta_moment(double a, double b, int k) {
  double m = 1.0;
  for (int i = 0; i < k; ++i) m *= (a + i) / (a + b + i);
  return m;
}

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

TEST(RadiusMeasure, MassAndSupport) {
  const RadiusMeasure m({{1.0, 2.0}, {0.5, 1.0}}, RadiusDensity{{0.0, 2.0}, {1.0, 0.0}});
  EXPECT_DOUBLE_EQ(m.total_mass(), 4.0);
  EXPECT_DOUBLE_EQ(m.max_radius(), 2.0);
  EXPECT_DOUBLE_EQ(m.density_at(1.0), 0.5);
  EXPECT_DOUBLE_EQ(m.density_at(3.0), 0.0);
  // integral of r^2 (1 - r/2) on [0,2] = 8/3 - 2 = 2/3
  EXPECT_NEAR(m.integrate([](double r) { return r * r; }), 2.0 + 0.25 + 2.0 / 3.0, 1e-12);
}

TEST(RadiusMeasure, RejectsBadInput) {
  EXPECT_THROW(RadiusMeasure({{0.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(RadiusMeasure({{1.0, -1.0}}), std::invalid_argument);
  EXPECT_THROW(RadiusMeasure({}, RadiusDensity{{1.0, 0.5}, {1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(RadiusMeasure({}, RadiusDensity{{0.0, 1.0}, {1.0, -1.0}}), std::invalid_argument);
}

TEST(Impact, BetaMomentsMatchClosedForm) {
  for (auto [a, b] : {std::pair{2.0, 2.0}, {1.0, 1.0}, {0.5, 3.0}, {3.0, 0.7}, {0.3, 0.4}}) {
    const auto d = ImpactDistribution::beta(a, b);
    for (int k = 0; k <= 4; ++k) {
      EXPECT_NEAR(d.moment(k), beta_moment(a, b, k), 1e-8) << a << "," << b << " k=" << k;
    }
  }
}

TEST(Impact, TableIsNormalisedAndSamplesMatchMean) {
  const auto d = ImpactDistribution::table({0.0, 0.5, 1.0}, {0.0, 2.0, 0.0});
  EXPECT_NEAR(d.moment(0), 1.0, 1e-12);
  EXPECT_NEAR(d.moment(1), 0.5, 1e-12);
  Rng rng(5);
  double s = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = d.sample(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LE(u, 1.0);
    s += u;
  }
  EXPECT_NEAR(s / 100000, 0.5, 0.005);
}

TEST(Impact, RejectsValuesOutsideUnitInterval) {
  EXPECT_THROW(ImpactDistribution::point(1.5), std::invalid_argument);
  EXPECT_THROW(ImpactDistribution::point(-0.1), std::invalid_argument);
  EXPECT_THROW(ImpactDistribution::beta(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ImpactDistribution::table({0.0, 1.2}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(ImpactDistribution::table({0.0, 1.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST(Impact, KernelSelectsPieceByRadius) {
  const ImpactKernel k({{1.0, ImpactDistribution::point(0.2)},
                        {2.0, ImpactDistribution::point(0.7)}});
  EXPECT_DOUBLE_EQ(k.at(0.5).point_value(), 0.2);
  EXPECT_DOUBLE_EQ(k.at(1.0).point_value(), 0.2);
  EXPECT_DOUBLE_EQ(k.at(1.5).point_value(), 0.7);
  EXPECT_DOUBLE_EQ(k.at(9.0).point_value(), 0.7);
}

TEST(Admissibility, ReportsMassesAndBoundary) {
  EventLaw law = unit_law(0.5);
  const auto rep = check_admissibility(law);
  EXPECT_DOUBLE_EQ(rep.small.lambda_mass, 0.25);
  EXPECT_DOUBLE_EQ(rep.small.tilde_mass, 0.5);
  EXPECT_TRUE(rep.small.boundary_ok);
  EXPECT_FALSE(check_admissibility(unit_law(0.0)).small.boundary_ok);
}

TEST(Admissibility, InfiniteMassThrows) {
  EventLaw law = unit_law();
  law.small.radii = RadiusMeasure({{1.0, 1e308}, {2.0, 1e308}});
  EXPECT_THROW(check_admissibility(law), InadmissibleLaw);
}

TEST(Admissibility, RejectsNonPositivePsi) {
  EventLaw law = unit_law();
  law.psi = 0.0;
  EXPECT_THROW(check_admissibility(law), InadmissibleLaw);
}

TEST(Dispersal, UnitDiscVariance) {
  EXPECT_NEAR(dispersal_variance(unit_law(), EventScale::small), std::numbers::pi / 2.0, 1e-14);
  EXPECT_NEAR(single_lineage_jump_rate(unit_law(0.5), EventScale::small),
              std::numbers::pi / 2.0, 1e-14);
}

TEST(Dispersal, MonteCarloJumpVariance) {
  // Per-coordinate variance of one jump times the jump rate.
  const EventLaw law = unit_law(0.6);
  const TorusSpec t(100.0);
  Rng rng(6);
  const int n = 400000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const TorusPoint c = uniform_in_ball({0, 0}, 1.0, t, rng);
    const TorusPoint l = uniform_in_ball(c, 1.0, t, rng);
    s += 0.5 * (l.x * l.x + l.y * l.y);
  }
  const double mc = s / n * single_lineage_jump_rate(law, EventScale::small);
  EXPECT_NEAR(mc, dispersal_variance(law, EventScale::small), 0.01 * mc);
}

TEST(Dispersal, LineageVarianceAddsScaledLargeClass) {
  EventLaw law = unit_law();
  law.large = EventClass{RadiusMeasure::point(1.0), ImpactDistribution::point(0.5)};
  law.psi = 4.0;
  law.rho = 8.0;
  const double sb = dispersal_variance(law, EventScale::large);
  EXPECT_NEAR(sb, std::numbers::pi / 4.0, 1e-14);
  EXPECT_NEAR(lineage_variance(law), std::numbers::pi / 2.0 + sb * 16.0 / 8.0, 1e-13);
}

TEST(PairRate, LensTimesSecondMoment) {
  EventLaw law = unit_law();
  law.small.impact = ImpactDistribution::beta(2.0, 2.0);
  for (double d : {0.0, 0.5, 1.5, 2.5}) {
    EXPECT_NEAR(pair_coalescence_rate(d, law, EventScale::small),
                lens_area(d, 1.0) * beta_moment(2, 2, 2), 1e-12);
  }
}

TEST(PairRate, LargeClassUsesScaledRadiusAndIntensity) {
  EventLaw law = unit_law();
  law.large = EventClass{RadiusMeasure::point(1.0), ImpactDistribution::point(0.5)};
  law.psi = 3.0;
  law.rho = 50.0;
  EXPECT_NEAR(pair_coalescence_rate(2.0, law, EventScale::large),
              lens_area(2.0, 3.0) * 0.25 / (50.0 * 9.0), 1e-14);
  law.rho = INFINITY;
  EXPECT_EQ(pair_coalescence_rate(2.0, law, EventScale::large), 0.0);
}

TEST(Lambda, KingmanOnlyPairs) {
  const auto k = LambdaMeasure::kingman();
  EXPECT_DOUBLE_EQ(nonspatial_lambda_rate(5, 2, k), 1.0);
  EXPECT_DOUBLE_EQ(nonspatial_lambda_rate(5, 3, k), 0.0);
}

TEST(Lambda, LebesgueMatchesBetaFunction) {
  const auto leb = LambdaMeasure::lebesgue();
  for (int p = 2; p <= 8; ++p) {
    for (int j = 2; j <= p; ++j) {
      const double exact = factorial(j - 2) * factorial(p - j) / factorial(p - 1);
      EXPECT_NEAR(nonspatial_lambda_rate(p, j, leb), exact, 1e-10) << p << "," << j;
    }
  }
}

TEST(Lambda, ConsistencyRecursion) {
  // lambda_{p,j} = lambda_{p+1,j} + lambda_{p+1,j+1}
  for (const auto& lam : {LambdaMeasure::kingman(), LambdaMeasure::lebesgue(),
                          LambdaMeasure::beta(2.0, 2.0)}) {
    for (int p = 2; p <= 7; ++p) {
      for (int j = 2; j <= p; ++j) {
        EXPECT_NEAR(nonspatial_lambda_rate(p, j, lam),
                    nonspatial_lambda_rate(p + 1, j, lam) + nonspatial_lambda_rate(p + 1, j + 1, lam),
                    1e-6);
      }
    }
  }
}

TEST(Lambda, BetaCRatePointLaw) {
  const EventClass large{RadiusMeasure::point(0.2), ImpactDistribution::point(0.8)};
  const double c = 1.5, v = std::numbers::pi * 0.09, p = v * 0.8;
  for (int m = 2; m <= 5; ++m) {
    for (int k = 2; k <= m; ++k) {
      const double exact = std::pow(p, k) * std::pow(1 - p, m - k) / (c * c) + (k == 2 ? 0.3 : 0.0);
      EXPECT_NEAR(lambda_beta_c_rate(m, k, c, 0.3, large), exact, 1e-14);
    }
  }
  EXPECT_THROW(lambda_beta_c_rate(3, 2, 4.0, 0.0, large), std::invalid_argument);
  EXPECT_THROW(lambda_beta_c_rate(3, 1, 1.0, 0.0, large), std::invalid_argument);
}
