#include "odegrad/rng.hpp"

#include <cmath>

namespace odegrad {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

uint64_t mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

uint64_t RngState::next_u64() {
  ++counter_;
  return mix(seed_ + counter_ * kGolden);
}

double RngState::uniform() {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int RngState::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // rejection sampling to avoid modulo bias
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<int>(v % un);
}

double RngState::normal() {
  // Box-Muller; the second variate of the pair is discarded so the stream
  // position stays a simple function of the call count.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

RngState RngState::split() {
  RngState child(mix(next_u64() ^ kGolden));
  return child;
}

Tensor gaussian_sample(RngState& rng, std::vector<int> shape, double mean, double std) {
  if (std < 0.0) throw std::invalid_argument("gaussian_sample: std must be >= 0");
  Tensor out(std::move(shape));
  for (int i = 0; i < out.size(); ++i) out[i] = mean + std * rng.normal();
  return out;
}

}  // namespace odegrad
