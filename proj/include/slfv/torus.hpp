#pragma once

#include <cmath>
#include <numbers>

#include "slfv/rng.hpp"

namespace slfv {

/// A point of T(L), stored as its representative in [-L/2, L/2)^2.
struct TorusPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;
};

/// Square torus of side L, identified with the half-open box [-L/2, L/2)^2.
class TorusSpec {
 public:
  explicit TorusSpec(double sidelength);

  double sidelength() const { return side_; }
  double half() const { return half_; }
  double area() const { return side_ * side_; }
  /// Largest possible torus distance, L/sqrt(2).
  double max_distance() const { return side_ * std::numbers::sqrt2 / 2.0; }

  /// Maps a coordinate to [-L/2, L/2).
  double wrap(double c) const {
    if (c >= -half_ && c < half_) return c;
    double w = c - side_ * std::floor((c + half_) / side_);
    if (w >= half_) w -= side_;
    if (w < -half_) w = -half_;
    return w;
  }

  TorusPoint canonical(TorusPoint p) const { return {wrap(p.x), wrap(p.y)}; }
  bool is_canonical(TorusPoint p) const {
    return p.x >= -half_ && p.x < half_ && p.y >= -half_ && p.y < half_;
  }

  /// Shortest displacement vector from `from` to `to`, each component in [-L/2, L/2).
  TorusPoint displacement(TorusPoint from, TorusPoint to) const {
    return {wrap(to.x - from.x), wrap(to.y - from.y)};
  }

  TorusPoint translate(TorusPoint p, double dx, double dy) const {
    return {wrap(p.x + dx), wrap(p.y + dy)};
  }

  double distance_sq(TorusPoint a, TorusPoint b) const {
    const TorusPoint d = displacement(a, b);
    return d.x * d.x + d.y * d.y;
  }

 private:
  double side_;
  double half_;
};

/// Minimum over periodic images of the Euclidean distance.
inline double torus_distance(TorusPoint a, TorusPoint b, const TorusSpec& t) {
  return std::sqrt(t.distance_sq(a, b));
}

/// Area of the intersection of two planar discs of radius r at centre distance d.
double lens_area(double d, double r);

/// Area of {y in T(L) : |y| <= r}; handles the self-overlapping range L/2 < r <= L/sqrt(2).
double torus_ball_volume(double r, const TorusSpec& t);

/// Uniform point of the torus ball B(center, r).
TorusPoint uniform_in_ball(TorusPoint center, double r, const TorusSpec& t, Rng& rng);

TorusPoint uniform_on_torus(const TorusSpec& t, Rng& rng);

}  // namespace slfv
