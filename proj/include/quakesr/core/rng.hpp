#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace quakesr {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Identifies one independent random stream.
///
/// Streams form a tree: a run owns a root key built from the master seed, and every consumer
/// (particle, event, replicate, chain, iteration) derives a child. Two keys built along the same
/// path always yield the same engine, regardless of thread scheduling or evaluation order.
class StreamKey {
 public:
  constexpr explicit StreamKey(std::uint64_t seed) noexcept : state_(splitmix64(seed)) {}

  [[nodiscard]] constexpr StreamKey child(std::uint64_t tag) const noexcept {
    StreamKey k{0};
    k.state_ = splitmix64(state_ ^ splitmix64(tag ^ 0xD1B54A32D192ED03ULL));
    return k;
  }
  [[nodiscard]] constexpr StreamKey child(std::string_view tag) const noexcept {
    return child(fnv1a(tag));
  }
  template <class... Tags>
  [[nodiscard]] constexpr StreamKey child(std::uint64_t first, Tags... rest) const noexcept {
    if constexpr (sizeof...(rest) == 0) {
      return child(first);
    } else {
      return child(first).child(static_cast<std::uint64_t>(rest)...);
    }
  }
  template <class... Tags>
    requires(sizeof...(Tags) > 0)
  [[nodiscard]] constexpr StreamKey child(std::string_view first, Tags... rest) const noexcept {
    return child(fnv1a(first)).child(static_cast<std::uint64_t>(rest)...);
  }

  [[nodiscard]] Engine engine() const { return Engine{state_}; }
  [[nodiscard]] constexpr std::uint64_t value() const noexcept { return state_; }

  friend constexpr bool operator==(StreamKey, StreamKey) = default;

 private:
  std::uint64_t state_;
};

template <class Urbg>
double uniform01(Urbg& g) {
  // 53 random mantissa bits, strictly below 1
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Binomial draw. Small means use sequential inversion (one uniform per draw); large means
/// defer to std::binomial_distribution.
template <class Urbg>
std::int64_t sample_binomial(Urbg& g, std::int64_t n, double p) {
  if (n <= 0 || !(p > 0.0)) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - sample_binomial(g, n, 1.0 - p);
  const double mean = static_cast<double>(n) * p;
  if (mean < 12.0) {
    const double ratio = p / (1.0 - p);
    double f = std::exp(static_cast<double>(n) * std::log1p(-p));
    double u = uniform01(g);
    std::int64_t k = 0;
    while (u > f) {
      u -= f;
      ++k;
      if (k >= n) return n;
      f *= ratio * static_cast<double>(n - k + 1) / static_cast<double>(k);
      if (f <= 0.0) break;
    }
    return k;
  }
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(g);
}

}  // namespace quakesr
