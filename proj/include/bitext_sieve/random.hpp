#pragma once

#include <cstdint>
#include <random>

namespace sieve {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based derivation: the stream for record `id` depends only on
// (seed, id), so generation is independent of scheduling and worker count.
class RecordRng {
 public:
  RecordRng(std::uint64_t seed, std::uint64_t id) : engine_(mix64(mix64(seed) ^ mix64(id + 0x632BE59BD9B4E019ULL))) {}

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  // Uniform real in [lo, hi].
  double uniform_real(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;  // [0, 1)
    return lo + (hi - lo) * u;
  }

  bool coin() { return (engine_() >> 63) != 0; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sieve
