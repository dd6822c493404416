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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "ehsgd/random.hpp"

using namespace ehsgd;

TEST_CASE("philox4x32-10 matches published known-answer vectors", "[random]") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        Philox4x32Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
        Philox4x32Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Philox4x32Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("stream output is a pure function of its key", "[random]") {
  CounterStream a(7, 3, Purpose::kSchedule, 11);
  CounterStream b(7, 3, Purpose::kSchedule, 11);
  for (int k = 0; k < 100; ++k) REQUIRE(a.next_u32() == b.next_u32());

  // Any change to the address changes the first block.
  const std::uint64_t base = CounterStream(7, 3, Purpose::kSchedule, 11).next_u64();
  CHECK(CounterStream(8, 3, Purpose::kSchedule, 11).next_u64() != base);
  CHECK(CounterStream(7, 4, Purpose::kSchedule, 11).next_u64() != base);
  CHECK(CounterStream(7, 3, Purpose::kDataSample, 11).next_u64() != base);
  CHECK(CounterStream(7, 3, Purpose::kSchedule, 12).next_u64() != base);
}

TEST_CASE("stream words follow the documented counter layout", "[random]") {
  const std::uint64_t seed = 0x0123456789ABCDEFull;
  CounterStream s(seed, 5, Purpose::kArrival, (std::uint64_t{2} << 32) | 9u);
  const Philox4x32Key key = {0x89ABCDEFu, 0x01234567u};
  for (std::uint32_t block = 0; block < 3; ++block) {
    const auto expect = philox4x32_10({5u, (1u << 16) | block, 9u, 2u}, key);
    for (std::uint32_t w : expect) REQUIRE(s.next_u32() == w);
  }
}

TEST_CASE("uniform_index is in range and roughly uniform", "[random]") {
  constexpr std::uint64_t kN = 6;
  constexpr int kDraws = 120'000;
  std::vector<int> counts(kN, 0);
  for (int m = 0; m < kDraws; ++m) {
    CounterStream s(99, 0, Purpose::kSchedule, static_cast<std::uint64_t>(m));
    const auto v = s.uniform_index(kN);
    REQUIRE(v < kN);
    ++counts[v];
  }
  const double q = 1.0 / kN;
  const double se = std::sqrt(q * (1 - q) / kDraws);
  for (int c : counts) CHECK(std::abs(c / double(kDraws) - q) <= 3 * se);

  CounterStream s(1, 0, Purpose::kSchedule, 0);
  CHECK(s.uniform_index(1) == 0);
  CHECK_THROWS_AS(s.uniform_index(0), Error);
}

TEST_CASE("uniform01 lies in [0, 1) and has the right mean", "[random]") {
  CounterStream s(3, 1, Purpose::kConstants, 0);
  double sum = 0;
  constexpr int kDraws = 50'000;
  for (int k = 0; k < kDraws; ++k) {
    const double u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / kDraws - 0.5) <= 3 * std::sqrt(1.0 / 12 / kDraws));
}

TEST_CASE("normal draws have unit variance", "[random]") {
  CounterStream s(5, 0, Purpose::kSynthetic, 0);
  constexpr int kDraws = 60'000;
  double sum = 0, sq = 0;
  for (int k = 0; k < kDraws; ++k) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / kDraws) <= 3 / std::sqrt(double(kDraws)));
  CHECK(std::abs(sq / kDraws - 1.0) <= 3 * std::sqrt(2.0 / kDraws));
}

TEST_CASE("derived replay seeds are distinct", "[random]") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 10'000; ++r) seen.insert(derive_seed(42, r));
  CHECK(seen.size() == 10'000);
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}
