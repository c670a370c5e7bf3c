#pragma once

// Seeded random streams. Draws are derived from std::mt19937_64 output with
// fixed bit-level transforms so results do not depend on the standard
// library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace esm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  /// Independent stream for (master seed, ordinal).
  static Rng stream(std::uint64_t master, std::uint64_t ordinal) {
    return Rng(splitmix64(master) ^ splitmix64(ordinal * 0xD1B54A32D192ED03ULL + 1));
  }

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one value per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  std::vector<double> uniform_point(std::size_t d) {
    std::vector<double> p(d);
    for (auto& x : p) x = uniform();
    return p;
  }
  /// Uniformly random direction on the unit sphere in d dimensions.
  std::vector<double> direction(std::size_t d) {
    std::vector<double> v(d);
    double s = 0.0;
    do {
      s = 0.0;
      for (auto& x : v) {
        x = normal();
        s += x * x;
      }
    } while (s == 0.0);
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
    return v;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace esm
