#pragma once

#include <cstdint>
#include <random>

namespace dgm {

// mt19937_64 with an explicit bit-to-double mapping so generated streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(
                    static_cast<uint64_t>((static_cast<unsigned __int128>(bits()) * span) >> 64));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dgm
