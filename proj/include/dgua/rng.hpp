#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dgua {

// splitmix64; used to derive independent seeds from one master seed.
inline std::uint64_t split_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return split_mix(seed ^ split_mix(stream));
}

template <typename... Rest>
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, Rest... rest) {
  return mix_seed(mix_seed(seed, stream), rest...);
}

// FNV-1a, for labeling seed streams by name.
inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) {
  return mix_seed(seed, hash_label(label));
}

template <typename... Rest>
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view label, Rest... rest) {
  return mix_seed(mix_seed(seed, hash_label(label)), rest...);
}

// Seeded generator with fully specified double conversions, so the same seed
// produces the same stream on every platform the engine is specified for.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; two uniforms per draw, no cached spare
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection-free modulo is fine here; n is always tiny relative to 2^64
    return eng_() % n;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace dgua
