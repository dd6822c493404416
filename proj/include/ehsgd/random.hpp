/*
 * Copyright 2026 The ehsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Counter-based random streams.
//
// Every stochastic draw in a simulation is addressed by the tuple
// (master seed, user id, purpose, iteration). The tuple is mapped onto the
// key and counter of a Philox4x32-10 block cipher, so a draw depends only on
// its address and never on the order in which other draws were made. Two
// runs with the same seed are bitwise identical, and data sampling cannot
// perturb scheduling (or vice versa) because they use distinct purposes.
//
// Layout:
//   key     = { seed[31:0], seed[63:32] }
//   counter = { user, purpose << 16 | block, iteration[31:0], iteration[63:32] }
// where `block` indexes successive 128-bit outputs of one stream.

#ifndef EHSGD_RANDOM_HPP_
#define EHSGD_RANDOM_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "ehsgd/error.hpp"

namespace ehsgd {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr,
                                       Philox4x32Key key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

enum class Purpose : std::uint32_t {
  kArrival = 1,
  kSchedule = 2,
  kDataSample = 3,
  kSynthetic = 4,
  kConstants = 5,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t user = 0;
  Purpose purpose = Purpose::kArrival;
  std::uint64_t iteration = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for the `replay`-th independent repetition under one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replay) {
  return splitmix64(master ^ splitmix64(replay ^ 0x5DEECE66Dull));
}

/// Sequential reader over the blocks addressed by one StreamKey.
class CounterStream {
 public:
  explicit CounterStream(const StreamKey& key) : key_(key) {}
  CounterStream(std::uint64_t seed, std::uint32_t user, Purpose purpose,
                std::uint64_t iteration)
      : key_{seed, user, purpose, iteration} {}

  const StreamKey& key() const noexcept { return key_; }

  std::uint32_t next_u32() {
    if (lane_ == 4) refill();
    return buffer_[lane_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform integer in [0, n). Rejects the low 2^64 mod n raw values so the
  /// result is exactly uniform; always consumes at least one 64-bit draw.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw Error(ErrorKind::kInvalidSpec, "uniform_index over empty range");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t u = next_u64();
      if (u >= threshold) return u % n;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double probability) { return uniform01() < probability; }

  /// Standard normal via Box-Muller (one output per call).
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  void refill() {
    if (block_ > 0xFFFFu) {
      throw Error(ErrorKind::kInvariantViolation, "random stream exhausted");
    }
    const auto purpose = static_cast<std::uint32_t>(key_.purpose);
    const Philox4x32Counter ctr = {
        key_.user, (purpose << 16) | block_,
        static_cast<std::uint32_t>(key_.iteration),
        static_cast<std::uint32_t>(key_.iteration >> 32)};
    const Philox4x32Key key = {static_cast<std::uint32_t>(key_.seed),
                               static_cast<std::uint32_t>(key_.seed >> 32)};
    buffer_ = philox4x32_10(ctr, key);
    ++block_;
    lane_ = 0;
  }

  StreamKey key_;
  Philox4x32Counter buffer_{};
  std::uint32_t block_ = 0;
  int lane_ = 4;
};

}  // namespace ehsgd

#endif  // EHSGD_RANDOM_HPP_
