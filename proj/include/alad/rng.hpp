#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace alad {

// Deterministic splitmix64 generator. Distributions are implemented by hand
// so a given seed produces the same stream on every platform; the standard
// library's distribution objects do not guarantee that.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller. A fresh pair is drawn per call so the stream position does
  // not depend on parity of previous draws.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Independent child stream, deterministic in (parent seed, salt).
  /// Does not advance this generator.
  Rng fork(std::uint64_t salt) const {
    std::uint64_t z = state_ ^ (0xD1B54A32D192ED03ULL * (salt + 1));
    z = (z ^ (z >> 29)) * 0xFF51AFD7ED558CCDULL;
    return Rng(z ^ (z >> 32));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace alad
