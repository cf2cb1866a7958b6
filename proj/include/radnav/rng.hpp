#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace radnav {

/// Deterministic seeded RNG with named substreams.
///
/// Every stochastic element of a run (IMU noise, detection draws,
/// measurement noise, target placement) pulls from its own substream so
/// that truth realizations stay identical across resource-management
/// schemes sharing a seed. Distributions are implemented here rather
/// than taken from <random> so sequences do not depend on the standard
/// library build.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  /// Substream constructor: mixes (master seed, stream name, run index)
  /// through splitmix64 into an independent engine seed.
  Rng(uint64_t master_seed, std::string_view stream, uint64_t run_index = 0)
      : engine_(derive_seed(master_seed, stream, run_index)) {}

  /// Uniform in [0, 1).
  double uniform() {
    // 53-bit mantissa from the top bits of the 64-bit output.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no state caching, two draws per call).
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  bool bernoulli(double p) { return uniform() < p; }

  uint64_t next_u64() { return engine_(); }

  static uint64_t derive_seed(uint64_t master, std::string_view stream,
                              uint64_t run_index) {
    uint64_t h = master;
    h = splitmix64(h ^ 0x9e3779b97f4a7c15ULL);
    for (const char c : stream) h = splitmix64(h ^ static_cast<uint64_t>(c));
    h = splitmix64(h ^ (run_index + 0x2545f4914f6cdd1dULL));
    return h;
  }

 private:
  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace radnav
