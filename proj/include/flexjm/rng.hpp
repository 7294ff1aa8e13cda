#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flexjm {

// Deterministic random number source. The mt19937_64 engine itself is fully
// specified by the standard, but the std:: distributions are not, so all
// transforms are implemented here explicitly to make chains byte-reproducible
// across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, id) pairs, e.g. per replicate or per chain.
  static Rng derive(std::uint64_t seed, std::uint64_t id) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (id + 1);
    return Rng(splitmix64(splitmix64(x)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Uniform on {0, ..., m-1} by rejection, unbiased.
  std::uint64_t uniform_int(std::uint64_t m) {
    const std::uint64_t lim = UINT64_MAX - UINT64_MAX % m;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= lim);
    return x % m;
  }

  // Standard normal via Box-Muller; the second value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // in (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(1.0 - uniform01()); }

  // Gamma(shape, rate 1), Marsaglia and Tsang (2000); shapes below one are
  // boosted via Gamma(shape+1) * U^(1/shape).
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = 1.0 - uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  // Inverse gamma with density b^a/Gamma(a) x^{-a-1} exp(-b/x).
  double inv_gamma(double a, double b) { return b / gamma(a); }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flexjm
