#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace valo {

// Deterministic random stream. mt19937_64 output is fully specified by the
// standard; the double/normal mappings below are hand-rolled because the
// std::*_distribution adapters are implementation-defined and would break
// byte-identical reproducibility across stdlibs.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Derive an independent substream, e.g. per frame or per stage.
  static Rng sub(uint64_t seed, uint64_t stream, uint64_t index = 0) {
    return Rng(mix(mix(seed, stream), index));
  }

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) { return eng_() % n; }

  // Standard normal via Box-Muller. Two u64 draws per call, no cached spare,
  // so the draw sequence is a pure function of the call count.
  double normal() {
    double u1 = u01();
    double u2 = u01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  static uint64_t mix(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the combined word
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::mt19937_64 eng_;
};

} // namespace valo
