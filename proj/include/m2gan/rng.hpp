#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "m2gan/common.hpp"

namespace m2gan {

// Deterministic random stream. All sample paths are hand-rolled on top of
// raw mt19937_64 output so values are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Named substream derivation: every consumer of randomness in the project
  // pulls from substream(root, purpose, {ids...}) so that adding or removing
  // one consumer never perturbs another.
  static Rng substream(uint64_t root, std::string_view purpose,
                       std::initializer_list<uint64_t> ids = {}) {
    uint64_t h = fnv1a64(&root, sizeof(root));
    h = fnv1a64(purpose.data(), purpose.size(), h);
    for (uint64_t id : ids) h = fnv1a64(&id, sizeof(id), h);
    // avoid the all-zero seed edge
    return Rng(h ^ 0x9e3779b97f4a7c15ull);
  }

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive on both ends
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p_true) { return uniform() < p_true; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace m2gan
