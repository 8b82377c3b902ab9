#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vtw {

// Deterministic random source. mt19937_64 output is pinned by the standard;
// the derived draws below are hand-rolled (instead of <random> distributions,
// whose algorithms are implementation-defined) so that a seed reproduces the
// exact same stream on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in [0, n). Modulo bias is < 2^-32 for the small n used here.
  std::uint32_t below(std::uint32_t n) { return static_cast<std::uint32_t>(gen_() % n); }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double stddev) { return stddev * normal(); }

  // Normal truncated by clamping at +/- nsigma standard deviations.
  double normal_clamped(double stddev, double nsigma = 4.0) {
    double z = normal();
    if (z > nsigma) z = nsigma;
    if (z < -nsigma) z = -nsigma;
    return stddev * z;
  }

  // splitmix64 mix for deriving independent per-stream seeds from one seed.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace vtw
