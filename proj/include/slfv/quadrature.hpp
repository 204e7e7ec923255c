#pragma once

#include <array>
#include <cstddef>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace slfv::quad {

inline constexpr std::size_t kGaussPoints = 64;

struct GaussLegendreRule {
  std::array<double, kGaussPoints> nodes;    // on [-1, 1]
  std::array<double, kGaussPoints> weights;
};

/// 64-point Gauss-Legendre rule, computed once by Newton iteration on P_64.
const GaussLegendreRule& gauss_legendre64();

template <class F>
double gauss_legendre(F&& f, double a, double b) {
  const auto& rule = gauss_legendre64();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < kGaussPoints; ++i) {
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return sum * half;
}

inline constexpr double kTolerance = 1e-11;

/// Adaptive Gauss-Kronrod integration of a piece of a tabulated integrand.
template <class F>
double adaptive(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20,
                                                                       kTolerance);
}

}  // namespace slfv::quad
