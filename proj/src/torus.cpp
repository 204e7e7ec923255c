#include "slfv/torus.hpp"

#include <stdexcept>
#include <string>

namespace slfv {

namespace {

// Radii are accepted up to L/sqrt(2) plus a rounding allowance.
constexpr double kRadiusSlack = 1e-12;

void check_radius(double r, const TorusSpec& t) {
  if (!(r >= 0.0) || r > t.max_distance() * (1.0 + kRadiusSlack)) {
    throw std::invalid_argument("radius " + std::to_string(r) +
                                " outside [0, L/sqrt(2)] for L = " +
                                std::to_string(t.sidelength()));
  }
}

}  // namespace

TorusSpec::TorusSpec(double sidelength) : side_(sidelength), half_(sidelength / 2.0) {
  if (!(sidelength > 0.0) || !std::isfinite(sidelength)) {
    throw std::invalid_argument("torus sidelength must be positive and finite");
  }
}

double lens_area(double d, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("lens_area: radius must be positive");
  if (d < 0.0) throw std::invalid_argument("lens_area: negative distance");
  if (d >= 2.0 * r) return 0.0;
  const double area = 2.0 * r * r * std::acos(d / (2.0 * r)) -
                      0.5 * d * std::sqrt(4.0 * r * r - d * d);
  return area > 0.0 ? area : 0.0;
}

double torus_ball_volume(double r, const TorusSpec& t) {
  check_radius(r, t);
  const double h = t.half();
  const double disc = std::numbers::pi * r * r;
  if (r <= h) return disc;
  if (r >= t.max_distance()) return t.area();
  // The disc pokes out of the fundamental square through four circular
  // segments at distance L/2 from the centre; those points are nearer to
  // another image of the centre and are not part of the ball.
  const double segment = r * r * std::acos(h / r) - h * std::sqrt(r * r - h * h);
  return disc - 4.0 * segment;
}

TorusPoint uniform_on_torus(const TorusSpec& t, Rng& rng) {
  const double h = t.half();
  return t.canonical({rng.uniform(-h, h), rng.uniform(-h, h)});
}

TorusPoint uniform_in_ball(TorusPoint center, double r, const TorusSpec& t, Rng& rng) {
  if (!(r > 0.0)) throw std::invalid_argument("uniform_in_ball: radius must be positive");
  check_radius(r, t);
  if (r <= t.half()) {
    const double r2 = r * r;
    for (;;) {
      const double dx = rng.uniform(-r, r);
      const double dy = rng.uniform(-r, r);
      if (dx * dx + dy * dy <= r2) return t.translate(center, dx, dy);
    }
  }
  const double r2 = r * r;
  for (;;) {
    const TorusPoint p = uniform_on_torus(t, rng);
    if (t.distance_sq(center, p) <= r2) return p;
  }
}

}  // namespace slfv
