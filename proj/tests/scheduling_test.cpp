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
#include <vector>

#include "ehsgd/scheduling.hpp"

using namespace ehsgd;

namespace {

const BatterySnapshot kNoView{};

InterArrival gap_at(Iteration t, Iteration next) {
  return InterArrival{t, next, false, next - t};
}

std::vector<ArrivalModel> periodic_models(const std::vector<Iteration>& periods, std::size_t n, Iteration horizon) {
  std::vector<ArrivalModel> models;
  for (std::size_t i = 0; i < n; ++i) models.push_back(periodic_schedule(periods[i % periods.size()], horizon));
  return models;
}

}  // namespace

TEST_CASE("policy names round-trip", "[scheduling]") {
  for (auto p : {Policy::kDeterministicUniformSlot, Policy::kBestEffort, Policy::kNaiveUnscaled,
                 Policy::kWaitForAll, Policy::kFullParticipation}) {
    CHECK(parse_policy(policy_name(p)) == p);
  }
  CHECK_FALSE(parse_policy("greedy").has_value());
}

TEST_CASE("alg1 slot is uniform over the inter-arrival gap", "[scheduling][statistical]") {
  const SchedulingRule rule = make_rule(Policy::kDeterministicUniformSlot, DeterministicSchedule{{4, 10}});
  constexpr int kM = 100'000;
  std::vector<int> hits(6, 0);
  for (int m = 0; m < kM; ++m) {
    CounterStream stream(derive_seed(1, m), 0, Purpose::kSchedule, 4);
    const UserEnergyState s = on_energy({}, rule, 4, gap_at(4, 10), stream);
    REQUIRE(s.battery == 1);
    REQUIRE(s.pending_weight == 6.0);
    const Iteration slot = *s.pending_slot;
    REQUIRE(slot >= 4);
    REQUIRE(slot <= 9);
    ++hits[slot - 4];
  }
  const double q = 1.0 / 6;
  for (int h : hits) CHECK(std::abs(h / double(kM) - q) <= 3 * std::sqrt(q * (1 - q) / kM));
}

TEST_CASE("alg1 with a unit gap participates immediately with weight 1", "[scheduling]") {
  const SchedulingRule rule = make_rule(Policy::kDeterministicUniformSlot, DeterministicSchedule{{4, 5}});
  CounterStream stream(0, 0, Purpose::kSchedule, 4);
  UserEnergyState s = on_energy({}, rule, 4, gap_at(4, 5), stream);
  CHECK(s.pending_slot == 4);
  CHECK(s.pending_weight == 1.0);
  auto [d, next] = decide(s, rule, 4, kNoView);
  CHECK(d.participates);
  CHECK(d.weight == 1.0);
  CHECK(next.battery == 0);
  CHECK_FALSE(next.pending_slot.has_value());
}

TEST_CASE("alg1 participates exactly at the pending slot", "[scheduling]") {
  const SchedulingRule rule{Policy::kDeterministicUniformSlot, 1.0};
  const UserEnergyState s{1, 7, 6.0};
  CHECK_FALSE(decide(s, rule, 6, kNoView).first.participates);
  auto [d, next] = decide(s, rule, 7, kNoView);
  CHECK(d.participates);
  CHECK(d.weight == 6.0);
  CHECK(next.battery == 0);
}

TEST_CASE("alg1 errors", "[scheduling]") {
  const SchedulingRule rule{Policy::kDeterministicUniformSlot, 1.0};
  CounterStream stream(0, 0, Purpose::kSchedule, 3);
  try {
    on_energy({}, rule, 3, InterArrival{}, stream);
    FAIL("expected MissingGap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingGap);
  }
  try {
    on_energy({1, 5, 3.0}, rule, 3, gap_at(3, 6), stream);
    FAIL("expected InvariantViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvariantViolation);
  }
}

TEST_CASE("policy and arrival model compatibility", "[scheduling]") {
  CHECK_THROWS_AS(make_rule(Policy::kDeterministicUniformSlot, Bernoulli{0.5}), Error);
  CHECK_THROWS_AS(make_rule(Policy::kDeterministicUniformSlot, UniformWindow{3}), Error);
  CHECK_THROWS_AS(make_rule(Policy::kBestEffort, DeterministicSchedule{{0}}), Error);
  CHECK_NOTHROW(make_rule(Policy::kNaiveUnscaled, Bernoulli{0.5}));
  CHECK_NOTHROW(make_rule(Policy::kWaitForAll, DeterministicSchedule{{0}}));
  CHECK(make_rule(Policy::kBestEffort, Bernoulli{0.25}).static_weight == 4.0);
  CHECK(make_rule(Policy::kBestEffort, UniformWindow{5}).static_weight == 5.0);
}

TEST_CASE("best effort with certain arrivals participates every step with weight 1", "[scheduling]") {
  ParticipationProcess proc({Bernoulli{1.0}}, Policy::kBestEffort, 10, 3);
  for (int t = 0; t < 10; ++t) {
    const auto& d = proc.step();
    REQUIRE(d[0].participates);
    REQUIRE(d[0].weight == 1.0);
  }
}

TEST_CASE("naive participates on each arrival with weight 1", "[scheduling]") {
  ParticipationProcess proc({DeterministicSchedule{{0, 4, 10}}}, Policy::kNaiveUnscaled, 12, 0);
  std::vector<Iteration> when;
  for (Iteration t = 0; t < 12; ++t) {
    const auto& d = proc.step();
    if (d[0].participates) {
      when.push_back(t);
      REQUIRE(d[0].weight == 1.0);
    }
  }
  CHECK(when == std::vector<Iteration>{0, 4, 10});
}

TEST_CASE("a second arrival on a charged battery is wasted", "[scheduling]") {
  // User 1 never arrives, so user 0 stays charged under wait_for_all.
  ParticipationProcess proc({DeterministicSchedule{{0, 2, 3}}, DeterministicSchedule{{}}}, Policy::kWaitForAll, 5, 0);
  for (int t = 0; t < 5; ++t) proc.step();
  CHECK(proc.states()[0].battery == 1);
  CHECK(proc.counters()[0].arrivals == 3);
  CHECK(proc.counters()[0].wasted == 2);
  CHECK(proc.counters()[0].spent == 0);
}

TEST_CASE("wait_for_all fires when the slowest user charges", "[scheduling]") {
  const std::vector<Iteration> periods{1, 5, 10, 20};
  ParticipationProcess proc(periodic_models(periods, 40, 400), Policy::kWaitForAll, 400, 0);
  std::vector<Iteration> fired;
  for (Iteration t = 0; t < 400; ++t) {
    const auto& d = proc.step();
    bool any = false, all = true;
    for (const auto& x : d) {
      any |= x.participates;
      all &= x.participates;
    }
    REQUIRE(any == all);
    if (all) fired.push_back(t);
  }
  REQUIRE(fired.size() == 20);
  for (std::size_t k = 0; k < fired.size(); ++k) CHECK(fired[k] == static_cast<Iteration>(20 * k));
}

TEST_CASE("alg1 participates once per inter-arrival interval", "[scheduling][property]") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterStream s(seed, 0, Purpose::kConstants, 0);
    const Iteration horizon = 1 + static_cast<Iteration>(s.uniform_index(80));
    std::vector<ArrivalModel> models;
    for (int i = 0; i < 3; ++i) {
      const double beta = 0.1 + 0.8 * s.uniform01();
      const EnergyTrace tr = realize_trace(Bernoulli{beta}, horizon, seed, i);
      std::vector<Iteration> times;
      for (Iteration t = 0; t < horizon; ++t) {
        if (tr.arrived(t)) times.push_back(t);
      }
      models.push_back(DeterministicSchedule{times});
    }
    ParticipationProcess proc(models, Policy::kDeterministicUniformSlot, horizon, seed);
    std::vector<std::vector<Iteration>> part(3);
    for (Iteration t = 0; t < horizon; ++t) {
      const auto& d = proc.step();
      for (int i = 0; i < 3; ++i) {
        if (d[i].participates) part[i].push_back(t);
      }
    }
    for (int i = 0; i < 3; ++i) {
      const auto& times = std::get<DeterministicSchedule>(models[i]).times;
      REQUIRE(part[i].size() == times.size());
      for (std::size_t k = 0; k < times.size(); ++k) {
        const Iteration next = k + 1 < times.size() ? times[k + 1] : horizon;
        REQUIRE(part[i][k] >= times[k]);
        REQUIRE(part[i][k] < next);
      }
      REQUIRE(proc.counters()[i].wasted == 0);
    }
  }
}

TEST_CASE("participation never exceeds harvested energy", "[scheduling][property]") {
  const Policy policies[] = {Policy::kDeterministicUniformSlot, Policy::kBestEffort, Policy::kNaiveUnscaled,
                             Policy::kWaitForAll};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    CounterStream s(seed, 1, Purpose::kConstants, 0);
    const Policy policy = policies[s.uniform_index(4)];
    const Iteration horizon = 1 + static_cast<Iteration>(s.uniform_index(50));
    const std::size_t n = 1 + s.uniform_index(4);
    std::vector<ArrivalModel> models;
    for (std::size_t i = 0; i < n; ++i) {
      const bool det = policy == Policy::kDeterministicUniformSlot ||
                       (policy != Policy::kBestEffort && s.bernoulli(0.5));
      if (det) {
        models.push_back(periodic_schedule(1 + static_cast<Iteration>(s.uniform_index(6)), horizon,
                                           static_cast<Iteration>(s.uniform_index(3)) % horizon));
      } else if (s.bernoulli(0.5)) {
        models.push_back(Bernoulli{0.05 + 0.95 * s.uniform01()});
      } else {
        models.push_back(UniformWindow{1 + static_cast<Iteration>(s.uniform_index(6))});
      }
    }
    ParticipationProcess proc(models, policy, horizon, seed);
    std::vector<std::int64_t> harvested(n, 0), used(n, 0);
    for (Iteration t = 0; t < horizon; ++t) {
      const auto& d = proc.step();
      for (std::size_t i = 0; i < n; ++i) {
        harvested[i] += proc.traces()[i].arrived(t);
        used[i] += d[i].participates;
        REQUIRE(used[i] <= harvested[i]);
        REQUIRE(proc.states()[i].battery >= 0);
        REQUIRE(proc.states()[i].battery <= 1);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = proc.counters()[i];
      REQUIRE(c.arrivals == harvested[i]);
      REQUIRE(c.spent == used[i]);
      REQUIRE(c.spent + c.wasted + proc.states()[i].battery == c.arrivals);
    }
  }
}

TEST_CASE("alg1 under arrivals every step reduces to full participation", "[scheduling]") {
  ParticipationProcess alg1(periodic_models({1}, 6, 50), Policy::kDeterministicUniformSlot, 50, 4);
  for (int t = 0; t < 50; ++t) {
    for (const auto& d : alg1.step()) {
      REQUIRE(d.participates);
      REQUIRE(d.weight == 1.0);
    }
  }
}

TEST_CASE("full participation involves everyone every step", "[scheduling]") {
  auto proc = ParticipationProcess::full(3, 4, 0);
  for (int t = 0; t < 4; ++t) {
    for (const auto& d : proc.step()) REQUIRE((d.participates && d.weight == 1.0));
  }
  CHECK(proc.counters()[0].spent == 4);
  CHECK_THROWS_AS(proc.step(), Error);
}
