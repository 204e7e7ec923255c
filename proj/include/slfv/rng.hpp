#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace slfv {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a of a stream name, used to give each experiment its own seed space.
constexpr std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based seed split: the seed of replicate `replicate` in stream
/// `stream` depends only on the three inputs, never on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t replicate) {
  return splitmix64(splitmix64(splitmix64(root) ^ stream) + replicate);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t group, std::uint64_t replicate) {
  return derive_seed(splitmix64(root ^ splitmix64(group)), stream, replicate);
}

/// Uniform in [0,1) from a hash of (key, a, b). Used for per-block coins so
/// that the outcome of an event for a block depends only on the event key and
/// the block's label.
inline double hashed_uniform(std::uint64_t key, double a, double b) {
  const std::uint64_t h = splitmix64(
      key ^ splitmix64(std::bit_cast<std::uint64_t>(a) ^
                       splitmix64(std::bit_cast<std::uint64_t>(b))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() { return std::normal_distribution<double>{}(engine_); }

  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::uint64_t>{mean}(engine_);
  }

  double gamma(double shape) {
    return std::gamma_distribution<double>{shape, 1.0}(engine_);
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace slfv
