#include "slfv/event_model.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

#include "slfv/errors.hpp"
#include "slfv/torus.hpp"

namespace slfv {


namespace {

double lerp_at(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (xs.empty() || x < xs.front() || x > xs.back()) return 0.0;
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.end()) return ys.back();
  const auto i = static_cast<std::size_t>(it - xs.begin());
  if (i == 0) return ys.front();
  const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

void check_grid(const std::vector<double>& xs, const std::vector<double>& ys, const char* what) {
  if (xs.size() < 2 || xs.size() != ys.size()) {
    throw std::invalid_argument(std::string(what) + ": need at least two grid points and matching values");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]) || ys[i] < 0.0) {
      throw std::invalid_argument(std::string(what) + ": grid values must be finite and non-negative");
    }
    if (i > 0 && !(xs[i] > xs[i - 1])) {
      throw std::invalid_argument(std::string(what) + ": grid must be strictly increasing");
    }
  }
}

}  // namespace

// --- RadiusMeasure ----------------------------------------------------------

RadiusMeasure::RadiusMeasure(std::vector<RadiusAtom> atoms, std::optional<RadiusDensity> density)
    : atoms_(std::move(atoms)), density_(std::move(density)) {
  for (const auto& a : atoms_) {
    if (!(a.radius > 0.0) || !std::isfinite(a.radius)) {
      throw std::invalid_argument("radius atoms must be positive and finite");
    }
    if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) {
      throw std::invalid_argument("radius weights must be non-negative and finite");
    }
    total_mass_ += a.weight;
    if (a.weight > 0.0) max_radius_ = std::max(max_radius_, a.radius);
  }
  if (density_) {
    check_grid(density_->radii, density_->values, "radius density");
    if (density_->radii.front() < 0.0) throw std::invalid_argument("radius density: negative radius");
    const auto& g = density_->radii;
    const auto& v = density_->values;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      total_mass_ += 0.5 * (v[i] + v[i + 1]) * (g[i + 1] - g[i]);
      if (v[i] > 0.0 || v[i + 1] > 0.0) max_radius_ = std::max(max_radius_, g[i + 1]);
    }
  }
}

double RadiusMeasure::density_at(double r) const {
  return density_ ? lerp_at(density_->radii, density_->values, r) : 0.0;
}

double RadiusMeasure::sample(Rng& rng) const {
  if (!(total_mass_ > 0.0)) throw std::logic_error("cannot sample from a zero radius measure");
  double v = rng.uniform() * total_mass_;
  for (const auto& a : atoms_) {
    if (v < a.weight) return a.radius;
    v -= a.weight;
  }
  if (density_) {
    const auto& g = density_->radii;
    const auto& d = density_->values;
    std::size_t seg = 0;
    for (; seg + 2 < g.size(); ++seg) {
      const double m = 0.5 * (d[seg] + d[seg + 1]) * (g[seg + 1] - g[seg]);
      if (v < m) break;
      v -= m;
    }
    const double bound = std::max(d[seg], d[seg + 1]);
    for (;;) {
      const double r = rng.uniform(g[seg], g[seg + 1]);
      if (rng.uniform() * bound <= lerp_at(g, d, r)) return r;
    }
  }
  return atoms_.back().radius;
}

// --- ImpactDistribution -----------------------------------------------------

ImpactDistribution ImpactDistribution::point(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("impact point mass must lie in [0,1]");
  ImpactDistribution d;
  d.kind_ = Kind::point;
  d.u_ = u;
  return d;
}

ImpactDistribution ImpactDistribution::beta(double a, double b) {
  if (!(a > 0.0 && b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("impact Beta parameters must be positive");
  }
  ImpactDistribution d;
  d.kind_ = Kind::beta;
  d.a_ = a;
  d.b_ = b;
  d.log_norm_ = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return d;
}

ImpactDistribution ImpactDistribution::table(std::vector<double> grid, std::vector<double> density) {
  check_grid(grid, density, "impact table");
  if (grid.front() < 0.0 || grid.back() > 1.0) {
    throw std::invalid_argument("impact table must be supported on [0,1]");
  }
  ImpactDistribution d;
  d.kind_ = Kind::table;
  double total = 0.0;
  d.cumulative_.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    total += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
    d.cumulative_.push_back(total);
  }
  if (!(total > 0.0)) throw std::invalid_argument("impact table has zero mass");
  for (double& v : density) v /= total;
  for (double& c : d.cumulative_) c /= total;
  d.grid_ = std::move(grid);
  d.density_ = std::move(density);
  return d;
}

double ImpactDistribution::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::point:
      return u_;
    case Kind::beta:
      return rng.beta(a_, b_);
    case Kind::table: {
      const double target = rng.uniform();
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
      auto i = static_cast<std::size_t>(it - cumulative_.begin());
      if (i >= cumulative_.size()) i = cumulative_.size() - 1;
      const double x0 = grid_[i], x1 = grid_[i + 1], f0 = density_[i], f1 = density_[i + 1];
      const double bound = std::max(f0, f1);
      for (;;) {
        const double x = rng.uniform(x0, x1);
        const double f = f0 + (f1 - f0) * (x - x0) / (x1 - x0);
        if (rng.uniform() * bound <= f) return x;
      }
    }
  }
  return u_;
}

ImpactKernel::ImpactKernel(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw std::invalid_argument("impact kernel needs at least one piece");
  for (std::size_t i = 1; i < pieces_.size(); ++i) {
    if (!(pieces_[i].upper_radius > pieces_[i - 1].upper_radius)) {
      throw std::invalid_argument("impact kernel pieces must have increasing radius bounds");
    }
  }
}

std::string_view to_string(EventScale s) { return s == EventScale::small ? "small" : "large"; }

// --- derived quantities -----------------------------------------------------

namespace {

ClassMasses class_masses(const EventClass& cls, const char* name) {
  ClassMasses m;
  m.lambda_mass = cls.integrate(
      [](double r, const ImpactDistribution& nu) { return r * r * nu.moment(2); });
  m.tilde_mass = cls.integrate(
      [](double r, const ImpactDistribution& nu) { return r * r * nu.moment(1); });
  if (!std::isfinite(m.tilde_mass)) {
    throw InadmissibleLaw(std::string(name) +
                          " events: integral of u r^2 nu_r(du) mu(dr) is not finite");
  }
  if (!std::isfinite(m.lambda_mass)) {
    throw InadmissibleLaw(std::string(name) +
                          " events: integral of u^2 r^2 nu_r(du) mu(dr) is not finite");
  }
  const double rmax = cls.radii.max_radius();
  if (rmax > 0.0) {
    // Radii arbitrarily close to the supremum must include non-null impacts.
    const bool atom_at_max = std::any_of(
        cls.radii.atoms().begin(), cls.radii.atoms().end(),
        [&](const RadiusAtom& a) { return a.radius == rmax && a.weight > 0.0; });
    const double probe = atom_at_max ? rmax : rmax * (1.0 - 1e-9);
    m.boundary_ok = !cls.impact.at(probe).is_null();
  }
  return m;
}

}  // namespace

AdmissibilityReport check_admissibility(const EventLaw& law) {
  AdmissibilityReport report;
  report.small = class_masses(law.small, "small");
  if (law.large) report.large = class_masses(*law.large, "large");
  if (!(law.psi > 0.0) || !std::isfinite(law.psi)) {
    throw InadmissibleLaw("large-event scale psi must be positive and finite");
  }
  if (!(law.rho > 0.0)) throw InadmissibleLaw("large-event rate divisor rho must be positive");
  return report;
}

double single_lineage_jump_rate(const EventLaw& law, EventScale scale) {
  if (scale == EventScale::large && !law.large_active()) return 0.0;
  const double mass = law.cls(scale).integrate(
      [](double r, const ImpactDistribution& nu) { return r * r * nu.moment(1); });
  const double rate = std::numbers::pi * mass;
  return scale == EventScale::small ? rate : rate / law.rho;
}

double dispersal_variance(const EventLaw& law, EventScale scale) {
  if (scale == EventScale::large && !law.large) return 0.0;
  // A lineage at the origin is moved by an event of radius r whose centre is
  // uniform on B(0,r) (area pi r^2, hit w.p. u) and lands uniformly on
  // B(centre,r): E|jump|^2 = r^2/2 + r^2/2, i.e. r^2/2 per coordinate.
  const double m4 = law.cls(scale).integrate(
      [](double r, const ImpactDistribution& nu) { return r * r * r * r * nu.moment(1); });
  return 0.5 * std::numbers::pi * m4;
}

double lineage_variance(const EventLaw& law) {
  double v = dispersal_variance(law, EventScale::small);
  if (law.large_active()) v += dispersal_variance(law, EventScale::large) * law.psi * law.psi / law.rho;
  return v;
}

double pair_coalescence_rate(double separation, const EventLaw& law, EventScale scale) {
  if (separation < 0.0) throw std::invalid_argument("negative separation");
  if (scale == EventScale::large && !law.large_active()) return 0.0;
  const double psi = scale == EventScale::small ? 1.0 : law.psi;
  const double rate = law.cls(scale).integrate([&](double r, const ImpactDistribution& nu) {
    const double reff = psi * r;
    if (separation >= 2.0 * reff) return 0.0;
    return lens_area(separation, reff) * nu.moment(2);
  });
  return rate / law.intensity_divisor(scale);
}

double nonspatial_lambda_rate(int p, int j, const LambdaMeasure& lambda) {
  if (j < 2 || j > p) throw std::invalid_argument("nonspatial_lambda_rate: need 2 <= j <= p");
  auto integrand = [p, j](double u) { return std::pow(u, j - 2) * std::pow(1.0 - u, p - j); };
  double rate = 0.0;
  for (const auto& [u, mass] : lambda.atoms) rate += mass * integrand(u);
  if (lambda.beta_mass > 0.0) {
    rate += lambda.beta_mass *
            ImpactDistribution::beta(lambda.beta_a, lambda.beta_b).expect(integrand);
  }
  return rate;
}

double lambda_beta_c_rate(int m, int k, double c, double beta, const EventClass& large) {
  if (k < 2 || k > m) throw std::invalid_argument("lambda_beta_c_rate: need 2 <= k <= m");
  if (!(c > 0.0)) throw std::invalid_argument("lambda_beta_c_rate: c must be positive");
  if (beta < 0.0) throw std::invalid_argument("lambda_beta_c_rate: beta must be non-negative");
  const TorusSpec unit(1.0);
  if (c * large.radii.max_radius() > unit.max_distance() * (1.0 + 1e-12)) {
    throw std::invalid_argument("lambda_beta_c_rate: c * radius exceeds 1/sqrt(2) on T(1)");
  }
  const double integral = large.integrate([&](double r, const ImpactDistribution& nu) {
    const double v = torus_ball_volume(std::min(c * r, unit.max_distance()), unit);
    return nu.expect(
        [&](double u) { return std::pow(v * u, k) * std::pow(1.0 - v * u, m - k); });
  });
  return integral / (c * c) + (k == 2 ? beta : 0.0);
}

}  // namespace slfv
