// Copyright 2026 The Artic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace artic {

// splitmix64 finalizer. Stream derivation below hashes (seed, tag, index)
// tuples through this so that shuffling, dropout, init and data generation
// all consume independent, restart-friendly streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                 std::uint64_t index = 0) {
  return mix64(seed ^ mix64(tag ^ mix64(index)));
}

// Stream tags used across the project. Keeping them in one place avoids
// accidental stream collisions between subsystems.
namespace seed_tag {
inline constexpr std::uint64_t kParamInit = 0x01;
inline constexpr std::uint64_t kShuffle = 0x02;
inline constexpr std::uint64_t kDropout = 0x03;
inline constexpr std::uint64_t kCorpus = 0x04;
inline constexpr std::uint64_t kProjection = 0x05;
}  // namespace seed_tag

// Deterministic RNG. mt19937_64 has a fully standardized sequence; the
// double/normal conversions are hand-rolled so results do not depend on the
// standard library's (unspecified) distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stdev) { return mean + stdev * normal(); }

  // Uniform index in [0, n) via rejection sampling (unbiased).
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }

  // Inclusive integer range.
  long uniform_int(long lo, long hi) {
    return lo + static_cast<long>(
                    uniform_index(static_cast<std::size_t>(hi - lo + 1)));
  }

  // Fisher-Yates; std::shuffle is implementation-defined, this one is not.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace artic
