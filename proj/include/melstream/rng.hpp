// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Deterministic, platform-independent random streams for weight init and
// test inputs. SplitMix64 per stream; streams are keyed by (seed, name) so
// adding a tensor never perturbs the values of the others.

#pragma once

#include <cstdint>
#include <string>

namespace melstream {

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  SplitMix64(uint64_t seed, const std::string& stream)
      : state_(seed ^ fnv1a64(stream)) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 24-bit resolution; exact across platforms.
  float next_float() {
    return static_cast<float>(next() >> 40) * (1.0f / 16777216.0f);
  }

  // Uniform in [-range, range).
  float next_uniform(float range) { return (2.f * next_float() - 1.f) * range; }

 private:
  uint64_t state_;
};

}  // namespace melstream
