#pragma once

#include <cstdint>

#include "odegrad/tensor.hpp"

namespace odegrad {

// Counter-based generator (splitmix64 core). The sample stream is a pure
// function of (seed, counter), so the same seed replays bit-identically on
// every platform. Copying the state forks the stream.
class RngState {
 public:
  explicit RngState(uint64_t seed) : seed_(seed), counter_(0) {}

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

  uint64_t next_u64();
  // uniform in [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  // uniform in {0, ..., n-1}
  int uniform_int(int n);
  // standard normal via Box-Muller
  double normal();

  // Derive an independent stream (used for per-thread fan-out).
  RngState split();

 private:
  uint64_t seed_;
  uint64_t counter_;
};

// i.i.d. N(mean, std^2) entries; deterministic under a fixed state.
Tensor gaussian_sample(RngState& rng, std::vector<int> shape, double mean, double std);

}  // namespace odegrad
