#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>
#include <string_view>

namespace made {

// splitmix64 (Vigna); used for seed derivation and hash mixing.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline uint64_t hash_double(double v, uint64_t h = 0xcbf29ce484222325ULL) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return fnv1a(&bits, sizeof(bits), h);
}

// Splittable seed derivation: fold each part through splitmix64.
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> parts) {
  uint64_t s = master;
  uint64_t out = splitmix64(s);
  for (uint64_t p : parts) {
    s = out ^ (p + 0x9e3779b97f4a7c15ULL);
    out = splitmix64(s);
  }
  return out;
}

// Deterministic RNG with explicit floating conversions. mt19937_64 output is
// fully specified by the standard, and the conversions below avoid the
// implementation-defined std::*_distribution classes.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace made
