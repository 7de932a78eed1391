// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace muonvr {

// Deterministic random stream with cheap derivation of independent
// substreams.  mt19937_64 keeps draws reproducible across platforms;
// normals come from a hand-rolled Box-Muller so the byte stream does
// not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

  // Independent stream derived from (seed, stream_id).
  Rng substream(std::uint64_t stream_id) const {
    return Rng(mix(seed_ ^ mix(stream_id + 0x9E3779B97F4A7C15ull)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n); n must be positive.
  long uniform_int(long n) {
    return static_cast<long>(uniform() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller with one cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0x1.0p-60) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer; spreads structured seeds over the full range.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace muonvr
