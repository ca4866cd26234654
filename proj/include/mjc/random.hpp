#pragma once

#include <cstdint>
#include <cmath>

namespace mjc {

// splitmix64 finalizer; stateless avalanche step used for seeding.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with deterministic substream derivation. Streams are indexed
// by (stream, substream) — e.g. (path id, noise channel) — so parallel
// ensembles reproduce bit-identically regardless of scheduling.
class RandomStream {
 public:
  RandomStream() : RandomStream(0) {}

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0,
                        std::uint64_t substream = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ (0xa0761d6478bd642fULL + stream));
    h = mix64(h ^ (0xe7037ed1a0b428dbULL + substream));
    for (auto& w : state_) w = h = mix64(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); never returns an endpoint, so
  // log(u) is safe.
  double uniform01() { return (next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Unit-mean exponential.
  double exponential() { return -std::log(uniform01()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace mjc
