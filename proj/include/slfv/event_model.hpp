#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "slfv/quadrature.hpp"
#include "slfv/rng.hpp"

namespace slfv {


struct RadiusAtom {
  double radius;
  double weight;
};

/// Piecewise-linear density tabulated on an increasing radius grid.
struct RadiusDensity {
  std::vector<double> radii;
  std::vector<double> values;
};

/// Finite measure on radii: a list of atoms plus an optional tabulated density.
class RadiusMeasure {
 public:
  RadiusMeasure() = default;
  explicit RadiusMeasure(std::vector<RadiusAtom> atoms,
                         std::optional<RadiusDensity> density = std::nullopt);

  static RadiusMeasure point(double radius, double weight = 1.0) {
    return RadiusMeasure({{radius, weight}});
  }

  const std::vector<RadiusAtom>& atoms() const { return atoms_; }
  const std::optional<RadiusDensity>& density() const { return density_; }

  bool empty() const { return total_mass() == 0.0; }
  /// Essential supremum of the support.
  double max_radius() const { return max_radius_; }
  double total_mass() const { return total_mass_; }
  double density_at(double r) const;
  /// A radius drawn from the normalised measure.
  double sample(Rng& rng) const;

  /// Integral of f(r) against the measure.
  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (const auto& a : atoms_) sum += a.weight * f(a.radius);
    if (density_) {
      const auto& g = density_->radii;
      const auto& v = density_->values;
      for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        if (v[i] == 0.0 && v[i + 1] == 0.0) continue;
        const double r0 = g[i], r1 = g[i + 1], v0 = v[i], v1 = v[i + 1];
        sum += quad::adaptive(
            [&](double r) { return (v0 + (v1 - v0) * (r - r0) / (r1 - r0)) * f(r); }, r0, r1);
      }
    }
    return sum;
  }

 private:
  std::vector<RadiusAtom> atoms_;
  std::optional<RadiusDensity> density_;
  double total_mass_ = 0.0;
  double max_radius_ = 0.0;
};

/// A probability law on [0,1] for the impact fraction u.
class ImpactDistribution {
 public:
  enum class Kind { point, beta, table };

  static ImpactDistribution point(double u);
  static ImpactDistribution beta(double a, double b);
  /// Piecewise-linear density on `grid` (a subset of [0,1]); normalised on construction.
  static ImpactDistribution table(std::vector<double> grid, std::vector<double> density);

  Kind kind() const { return kind_; }
  double point_value() const { return u_; }
  double beta_a() const { return a_; }
  double beta_b() const { return b_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& table_density() const { return density_; }

  /// True for the point mass at zero, i.e. events that never affect anyone.
  bool is_null() const { return kind_ == Kind::point && u_ == 0.0; }

  /// E[g(u)]. Beta laws use 64-point Gauss-Legendre on each half of [0,1],
  /// after the substitution u = t^(1/a) (or 1 - u = s^(1/b)) on a half whose
  /// endpoint is singular; tables are integrated piecewise.
  template <class G>
  double expect(G&& g) const {
    switch (kind_) {
      case Kind::point:
        return g(u_);
      case Kind::beta:
        return expect_beta(std::forward<G>(g));
      case Kind::table: {
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
          const double x0 = grid_[i], x1 = grid_[i + 1], f0 = density_[i], f1 = density_[i + 1];
          if (f0 == 0.0 && f1 == 0.0) continue;
          sum += quad::adaptive(
              [&](double x) { return (f0 + (f1 - f0) * (x - x0) / (x1 - x0)) * g(x); }, x0, x1);
        }
        return sum;
      }
    }
    return 0.0;
  }

  double moment(int k) const {
    return expect([k](double u) { return std::pow(u, k); });
  }

  double sample(Rng& rng) const;

 private:
  template <class G>
  double expect_beta(G&& g) const;

  Kind kind_ = Kind::point;
  double u_ = 1.0;
  double a_ = 1.0;
  double b_ = 1.0;
  double log_norm_ = 0.0;  // log B(a, b)
  std::vector<double> grid_;
  std::vector<double> density_;
  std::vector<double> cumulative_;  // segment masses, cumulative
};

/// r -> nu_r, as a list of radius pieces. Piece i covers radii up to
/// `upper_radius` (inclusive); the last piece extends to infinity.
class ImpactKernel {
 public:
  struct Piece {
    double upper_radius;
    ImpactDistribution law;
  };

  ImpactKernel(ImpactDistribution constant = ImpactDistribution::point(1.0))  // NOLINT
      : pieces_{{std::numeric_limits<double>::infinity(), std::move(constant)}} {}
  explicit ImpactKernel(std::vector<Piece> pieces);

  const ImpactDistribution& at(double r) const {
    for (const auto& p : pieces_) {
      if (r <= p.upper_radius) return p.law;
    }
    return pieces_.back().law;
  }
  const std::vector<Piece>& pieces() const { return pieces_; }

 private:
  std::vector<Piece> pieces_;
};

/// One class of reproduction events: a radius measure and an impact kernel.
struct EventClass {
  RadiusMeasure radii;
  ImpactKernel impact;

  /// Integral over mu(dr) of f(r, nu_r).
  template <class F>
  double integrate(F&& f) const {
    return radii.integrate([&](double r) { return f(r, impact.at(r)); });
  }
};

enum class EventScale { small, large };

std::string_view to_string(EventScale s);

/// Small events at unit scale plus optional large events whose radii are
/// multiplied by psi and whose intensity is divided by rho * psi^2.
struct EventLaw {
  EventClass small;
  std::optional<EventClass> large;
  double psi = 1.0;
  double rho = std::numeric_limits<double>::infinity();

  bool large_active() const {
    return large.has_value() && std::isfinite(rho) && large->radii.total_mass() > 0.0;
  }
  const EventClass& cls(EventScale s) const { return s == EventScale::small ? small : *large; }
  /// Radius on the torus of an event of base radius r.
  double effective_radius(EventScale s, double r) const {
    return s == EventScale::small ? r : psi * r;
  }
  /// Factor dividing the spatial intensity dt dx mu(dr).
  double intensity_divisor(EventScale s) const {
    return s == EventScale::small ? 1.0 : rho * psi * psi;
  }
};

struct ClassMasses {
  double lambda_mass = 0.0;  // integral of u^2 r^2
  double tilde_mass = 0.0;   // integral of u r^2
  bool boundary_ok = false;  // largest radii carry a non-null impact law
};

struct AdmissibilityReport {
  ClassMasses small;
  std::optional<ClassMasses> large;
};

/// Computes the finiteness masses for each class; throws InadmissibleLaw when
/// either is infinite or NaN.
AdmissibilityReport check_admissibility(const EventLaw& law);

/// Rate at which a single lineage is moved by events of the given class.
double single_lineage_jump_rate(const EventLaw& law, EventScale scale);

/// Per-coordinate displacement variance per unit time for one lineage, equal
/// to (pi/2) * integral of r^4 u. Large-class values are in units of psi
/// (the psi^2 / rho factor is applied by lineage_variance).
double dispersal_variance(const EventLaw& law, EventScale scale);

/// sigma_s^2 + sigma_B^2 psi^2 / rho: the per-coordinate variance per unit
/// time of a lineage on T(L) under both classes.
double lineage_variance(const EventLaw& law);

/// Instantaneous rate at which two lineages at the given planar separation
/// are both affected by one event of the class.
double pair_coalescence_rate(double separation, const EventLaw& law, EventScale scale);

/// Finite measure on [0,1] for a non-spatial Lambda-coalescent: atoms plus
/// a scaled Beta density.
struct LambdaMeasure {
  std::vector<std::pair<double, double>> atoms;  // (u, mass)
  double beta_mass = 0.0;
  double beta_a = 1.0;
  double beta_b = 1.0;

  static LambdaMeasure kingman() { return {{{0.0, 1.0}}, 0.0, 1.0, 1.0}; }
  static LambdaMeasure lebesgue() { return {{}, 1.0, 1.0, 1.0}; }
  static LambdaMeasure beta(double a, double b, double mass = 1.0) { return {{}, mass, a, b}; }
};

/// Rate at which a given group of j out of p blocks merges.
double nonspatial_lambda_rate(int p, int j, const LambdaMeasure& lambda);

/// Rate of one particular k-merger among m blocks for the coalescent driven by
/// large events on T(1) with radius c*r, plus the Kingman component beta.
double lambda_beta_c_rate(int m, int k, double c, double beta, const EventClass& large);

// ---------------------------------------------------------------------------

template <class G>
double ImpactDistribution::expect_beta(G&& g) const {
  const double a = a_, b = b_, norm = std::exp(-log_norm_);
  double left = 0.0, right = 0.0;
  if (a >= 1.0) {
    left = quad::gauss_legendre(
        [&](double u) { return g(u) * std::pow(u, a - 1.0) * std::pow(1.0 - u, b - 1.0); }, 0.0, 0.5);
  } else {
    left = quad::gauss_legendre(
               [&](double t) {
                 const double u = std::pow(t, 1.0 / a);
                 return g(u) * std::pow(1.0 - u, b - 1.0);
               },
               0.0, std::pow(0.5, a)) / a;
  }
  if (b >= 1.0) {
    right = quad::gauss_legendre(
        [&](double u) { return g(u) * std::pow(u, a - 1.0) * std::pow(1.0 - u, b - 1.0); }, 0.5, 1.0);
  } else {
    right = quad::gauss_legendre(
                [&](double s) {
                  const double u = 1.0 - std::pow(s, 1.0 / b);
                  return g(u) * std::pow(u, a - 1.0);
                },
                0.0, std::pow(0.5, b)) / b;
  }
  return (left + right) * norm;
}

}  // namespace slfv
