#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <vector>

namespace fedsim {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream. The n-th draw is a pure function of
/// (key, n), so streams keyed by (seed, tag, round, client) are independent
/// of the order in which workers consume them.
///
/// Satisfies UniformRandomBitGenerator, so it can drive <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return detail::splitmix64(key_ ^ detail::splitmix64(counter_++)); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via Box-Muller (one draw per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream for a (seed, domain, round, client) key. Distinct keys give
/// unrelated streams; identical keys replay identical draws.
inline RngStream rng_substream(std::uint64_t seed, std::string_view domain_tag, std::int64_t round,
                               std::int64_t client_id) {
  std::uint64_t k = detail::splitmix64(seed);
  k = detail::splitmix64(k ^ detail::fnv1a(domain_tag));
  k = detail::splitmix64(k ^ static_cast<std::uint64_t>(round));
  k = detail::splitmix64(k ^ (static_cast<std::uint64_t>(client_id) * 0xd1b54a32d192ed03ULL));
  return RngStream(k);
}

}  // namespace fedsim
