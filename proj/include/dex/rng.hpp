#pragma once

#include <cstdint>
#include <random>

#include "dex/errors.hpp"
#include "dex/math.hpp"

namespace dex {

using Rng = std::mt19937_64;

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

// Index draw from an explicit probability vector (inverse CDF).
inline int categorical(const Vec& probs, Rng& rng) {
  double u = uniform01(rng);
  double acc = 0.0;
  int last = static_cast<int>(probs.size()) - 1;
  for (int i = 0; i <= last; ++i) {
    acc += probs[i];
    if (u <= acc) return i;
  }
  return last;  // guard against accumulated rounding
}

inline long poisson_draw(double rate, Rng& rng) {
  if (rate <= 0.0) return 0;
  std::poisson_distribution<long> d(rate);
  return d(rng);
}

// Derives an independent stream for a labeled sub-task of a run seed.
inline Rng sub_rng(uint64_t seed, uint64_t stream) {
  std::seed_seq seq{seed, stream};
  return Rng(seq);
}

}  // namespace dex
