#ifndef MASKBEAM_RNG_HPP
#define MASKBEAM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "maskbeam/common.hpp"

namespace maskbeam {

// mt19937_64 with hand-rolled output transforms. The standard distribution
// objects are implementation-defined, so reproducible pipelines avoid them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method, spare discarded.
  double normal() {
    for (;;) {
      double u = 2.0 * uniform() - 1.0;
      double v = 2.0 * uniform() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent stream seed from a run seed and a stable tag
// (utterance id, parameter name). Generation order therefore never matters.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = fnv1a64(tag) ^ (seed + 0x9e3779b97f4a7c15ull);
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

}  // namespace maskbeam

#endif  // MASKBEAM_RNG_HPP
