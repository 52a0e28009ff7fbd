#ifndef SDLAB_RNG_HPP
#define SDLAB_RNG_HPP

#include <cstdint>
#include <cmath>

#include "sdlab/model.hpp"

namespace sdlab {

// Counter-based stream: output i = mix(key + i * golden). Streams keyed by
// (seed, replica) are independent and replayable from the key alone, so
// replicas can run on any worker in any order.
class CounterRng {
public:
  CounterRng() : key_(mix(0x9e3779b97f4a7c15ull)), ctr_(0) {}
  explicit CounterRng(uint64_t seed, uint64_t stream = 0)
      : key_(derive_key(seed, stream)), ctr_(0) {}

  static uint64_t derive_key(uint64_t seed, uint64_t stream) {
    return mix(mix(seed ^ 0x2545f4914f6cdd1dull) + mix(stream + 0x9e3779b97f4a7c15ull));
  }

  uint64_t next_u64() { return mix(key_ + (++ctr_) * 0x9e3779b97f4a7c15ull); }

  // uniform in (0, 1]
  double next_uniform() {
    return (double)((next_u64() >> 11) + 1) * 0x1.0p-53;
  }
  double next_exponential(double rate) { return -std::log(next_uniform()) / rate; }

  // unbiased uniform integer in [0, bound)
  uint64_t next_below(uint64_t bound) {
    uint64_t threshold = (-bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      unsigned __int128 m = (unsigned __int128)r * bound;
      if ((uint64_t)m >= threshold) return (uint64_t)(m >> 64);
    }
  }

private:
  uint64_t key_;
  uint64_t ctr_;

  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// Draw from the nu_rho marginal by CDF inversion; exact for any rational
// (alpha, rho), cost O(rho + tail).
inline long long nu_marginal_sample(const ModelSpec& spec, CounterRng& rng) {
  double u = rng.next_uniform() * nu_normalizer(spec);
  double w = 1.0;  // nu_weight(0)
  long long n = 0;
  for (;;) {
    if (u <= w || w < 1e-290) return n;
    u -= w;
    double ratio = nu_pmf_ratio(spec, n);
    if (ratio <= 0.0) return n;
    w *= ratio;
    ++n;
  }
}

}  // namespace sdlab

#endif
