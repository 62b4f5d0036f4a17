#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cl3d {

// Seedable generator whose output is identical on every platform.
//
// std::mt19937_64 is fully specified by the standard, but the std::*_distribution
// adaptors are not, so all derived quantities (uniform reals, bounded integers,
// normals) are computed here from raw 64-bit draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via the Marsaglia polar method.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Index drawn with probability proportional to weights[i]. Weights must be
  // nonnegative with positive sum.
  std::size_t categorical(const std::vector<double>& weights);

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent sub-seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t value);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b) {
  return derive_seed(derive_seed(seed, stream_a), stream_b);
}

// FNV-1a, stable across platforms. Used for cache keys and config hashes.
std::uint64_t fnv1a64(const std::string& bytes);

std::string hex64(std::uint64_t value);

}  // namespace cl3d
