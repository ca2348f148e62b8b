#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "popgp/errors.hpp"

namespace popgp {

// splitmix64 finalizer, used to derive substream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(base ^ mix_seed(stream));
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, Rest... rest) {
  return derive_seed(derive_seed(base, stream), static_cast<std::uint64_t>(rest)...);
}

// Named substreams. Feature sampling, the latent draw and request
// simulation each get their own stream, so e.g. changing the number of
// observed slots never changes the catalog or the latent popularities.
enum class Stream : std::uint64_t {
  kFeatures = 1,
  kLatent = 2,
  kRequests = 3,
  kChain = 4,
  kPredict = 5,
};

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, Stream s, Rest... rest) {
  return derive_seed(base, static_cast<std::uint64_t>(s), rest...);
}

// mt19937_64 with explicit uniform / normal / Poisson transforms. The
// standard-library distributions are implementation-defined, these are
// not, so seeded runs replay bit-identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw InvalidInputError("uniform_index: n must be positive");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Poisson draw: sequential inversion for small rates, Hormann's PTRS
  // transformed rejection above. Rates here are normally O(1); the large
  // branch exists for stress tests.
  long poisson(double rate) {
    if (!std::isfinite(rate) || rate < 0.0)
      throw NumericalError("poisson: rate must be finite and nonnegative");
    if (rate == 0.0) return 0;
    if (rate < 30.0) return poisson_inversion(rate);
    if (rate > 1e9) throw NumericalError("poisson: rate too large");
    return poisson_ptrs(rate);
  }

 private:
  long poisson_inversion(double rate) {
    const double u = uniform();
    double pmf = std::exp(-rate);
    double cdf = pmf;
    long k = 0;
    const long cap = static_cast<long>(rate + 40.0 * std::sqrt(rate) + 100.0);
    while (u > cdf && k < cap) {
      ++k;
      pmf *= rate / static_cast<double>(k);
      cdf += pmf;
    }
    return k;
  }

  // Hormann (1993), transformed rejection with squeeze.
  long poisson_ptrs(double mu) {
    const double b = 0.931 + 2.53 * std::sqrt(mu);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * log_mu - mu - std::lgamma(k + 1.0)) {
        return static_cast<long>(k);
      }
    }
  }

  static constexpr double kPi = 3.14159265358979323846;

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace popgp
