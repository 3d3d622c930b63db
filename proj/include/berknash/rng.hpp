#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace berknash {

// Named substreams; every random draw in a run comes from
// Rng::substream(seed, stream, round).
enum class Stream : std::uint64_t {
  kArmSampling = 1,
  kRollout = 2,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index);

  // Uniform on [0, 1) with 53 random bits; identical on every platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Inverse-CDF draw from a probability vector. Falls back to the last
  // positive entry when rounding leaves the cumulative sum below u.
  int categorical(std::span<const double> probs);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace berknash
