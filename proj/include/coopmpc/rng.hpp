#pragma once

#include <cstdint>

namespace coopmpc {

// splitmix64; platform-stable streams so seeded runs produce identical bytes everywhere
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [lo,hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // decorrelated stream for a (time, agent) pair
  static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t time, std::uint64_t agent) {
    Rng mix(seed ^ (0x517cc1b727220a95ULL * (time + 1)) ^ (0x2545f4914f6cdd1dULL * (agent + 1)));
    return mix.next();
  }

 private:
  std::uint64_t state_;
};

}  // namespace coopmpc
