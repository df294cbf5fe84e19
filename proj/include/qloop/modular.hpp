#pragma once

// Prime-field plumbing for the probabilistic identity-testing fast path:
// a fixed table of published 61..63-bit primes, a splittable deterministic
// PRNG, and modular arithmetic helpers sized so products fit in 128 bits.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qloop {

inline constexpr int kNumVars = 7;

// Fixed registry order; all exponent vectors and evaluation points use it.
enum Var : int { VS = 0, VY = 1, VU = 2, VV = 3, VW = 4, VEPS = 5, VC = 6 };

inline const std::array<std::string, kNumVars>& var_names() {
  static const std::array<std::string, kNumVars> names = {
      "s", "y", "u", "v", "w", "eps", "c"};
  return names;
}

inline int var_index(const std::string& name) {
  const auto& names = var_names();
  for (int i = 0; i < kNumVars; ++i)
    if (names[i] == name) return i;
  return -1;
}

// All primes exceed 2^60 so single-point collision odds are negligible,
// and stay below 2^63 so mulmod can use unsigned __int128.
inline std::vector<uint64_t> default_primes() {
  return {2305843009213693951ull,   // 2^61 - 1
          4611686018427387847ull,   // largest prime below 2^62
          9223372036854775783ull};  // largest prime below 2^63
}

// QLOOP_PRIMES: comma-separated decimal override.
inline std::vector<uint64_t> prime_table() {
  const char* env = std::getenv("QLOOP_PRIMES");
  if (!env || !*env) return default_primes();
  std::vector<uint64_t> out;
  std::stringstream ss(env);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  if (out.empty()) return default_primes();
  return out;
}

inline uint64_t mulmod(uint64_t a, uint64_t b, uint64_t p) {
  return static_cast<uint64_t>(
      static_cast<unsigned __int128>(a) * b % p);
}

inline uint64_t addmod(uint64_t a, uint64_t b, uint64_t p) {
  a += b;
  if (a >= p || a < b) a -= p;
  return a;
}

inline uint64_t submod(uint64_t a, uint64_t b, uint64_t p) {
  return a >= b ? a - b : a + (p - b);
}

inline uint64_t powmod(uint64_t base, uint64_t exp, uint64_t p) {
  uint64_t r = 1 % p;
  base %= p;
  while (exp) {
    if (exp & 1) r = mulmod(r, base, p);
    base = mulmod(base, base, p);
    exp >>= 1;
  }
  return r;
}

inline uint64_t invmod(uint64_t a, uint64_t p) {
  if (a % p == 0) throw std::domain_error("invmod: zero residue");
  return powmod(a % p, p - 2, p);
}

// splitmix64: deterministic, splittable by hashing a stream tag into the seed.
struct SplitMix64 {
  uint64_t state;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound) by rejection-free multiply-shift (bias negligible
  // at 64 bits; determinism is what matters here).
  uint64_t below(uint64_t bound) { return next() % bound; }

  int64_t range(int64_t lo, int64_t hi) {  // inclusive
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Derive an independent child stream from a textual tag.
  SplitMix64 split(const std::string& tag) const {
    uint64_t h = 0xcbf29ce484222325ull ^ state;
    for (unsigned char ch : tag) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    return SplitMix64(h);
  }
};

struct PrimePoint {
  uint64_t p = 0;
  std::array<uint64_t, kNumVars> res{};
};

// A fresh point with every residue nonzero (so Laurent monomials with
// negative exponents stay evaluable).
inline PrimePoint random_prime_point(uint64_t prime, SplitMix64& rng) {
  PrimePoint pt;
  pt.p = prime;
  for (int i = 0; i < kNumVars; ++i) pt.res[i] = 1 + rng.below(prime - 1);
  return pt;
}

}  // namespace qloop
