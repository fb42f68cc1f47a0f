#pragma once

#include <cstdint>

namespace rwalk {

// SplitMix64. Every stochastic routine derives its generator as
// EpisodeRng(seed, stream): stream 0 for single runs, the episode index for
// Monte Carlo fan-out. Results are therefore independent of worker count and
// of the order episodes are executed in.
class EpisodeRng {
 public:
  EpisodeRng(std::uint64_t seed, std::uint64_t stream) {
    state_ = mix(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
    state_ = mix(state_ ^ 0xBF58476D1CE4E5B9ULL);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace rwalk
