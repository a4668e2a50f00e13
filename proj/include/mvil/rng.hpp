#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mvil {

// SplitMix64 step. Used both as the PRNG core and as the seed-derivation
// hash so that every random stream in the project is reproducible from a
// single master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream tags for derive_seed. Keeping these in one enum documents the
// counter-split scheme: child = H(parent ^ H(tag) ^ H(a) ^ H(b)).
enum class Stream : std::uint64_t {
  episode = 1,
  placement = 2,
  expert_noise = 3,
  background_noise = 4,
  bank = 5,
  augment_episode = 6,
  augment_frame = 7,
  weight_init = 8,
  shuffle = 9,
  train_draw = 10,
  eval_episode = 11,
  action_sample = 12,
  crop = 13,
  attribution = 14,
  env_config = 15,
};

inline std::uint64_t derive_seed(std::uint64_t parent, Stream tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(parent ^ splitmix64(static_cast<std::uint64_t>(tag)));
  h = splitmix64(h ^ splitmix64(a + 0x512E3EAD0A1B2C3DULL));
  h = splitmix64(h ^ splitmix64(b + 0x2545F4914F6CDD1DULL));
  return h;
}

// Deterministic generator with hand-rolled distributions. The std::
// distributions are implementation-defined, which would tie artifact
// outputs to a particular standard library; these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller; caches the second draw.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Gaussian truncated to [-bound, bound] by rejection.
  double truncated_gaussian(double sigma, double bound) {
    for (int i = 0; i < 64; ++i) {
      const double v = sigma * gaussian();
      if (std::abs(v) <= bound) return v;
    }
    return 0.0;
  }

  // Beta(2,6) as the 2nd order statistic of 7 uniforms.
  double beta_2_6() {
    std::array<double, 7> u;
    for (double& v : u) v = uniform();
    double lo = 2.0, second = 2.0;
    for (double v : u) {
      if (v < lo) {
        second = lo;
        lo = v;
      } else if (v < second) {
        second = v;
      }
    }
    return second;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mvil
