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

// Participation decisions for energy-harvesting users.
//
// Each user owns a unit battery. An arrival charges it (a second arrival
// while charged is wasted) and a participation drains it. The policy decides
// when the charge is spent and by how much the local gradient is scaled:
//
//   alg1          on arrival at t, pick J ~ U{0..T^t-1}; participate at t+J
//                 with weight T^t (deterministic schedules only)
//   best_effort   participate on arrival, weight 1/beta or T (stochastic only)
//   naive         participate on arrival, weight 1
//   wait_for_all  participate when every battery is charged, weight 1
//   full          participate every iteration, weight 1, no energy metering

#ifndef EHSGD_SCHEDULING_HPP_
#define EHSGD_SCHEDULING_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ehsgd/energy_arrivals.hpp"
#include "ehsgd/error.hpp"
#include "ehsgd/random.hpp"

namespace ehsgd {

enum class Policy {
  kDeterministicUniformSlot,
  kBestEffort,
  kNaiveUnscaled,
  kWaitForAll,
  kFullParticipation,
};

inline std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::kDeterministicUniformSlot: return "alg1";
    case Policy::kBestEffort: return "best_effort";
    case Policy::kNaiveUnscaled: return "naive";
    case Policy::kWaitForAll: return "wait_for_all";
    case Policy::kFullParticipation: return "full";
  }
  return "unknown";
}

inline std::optional<Policy> parse_policy(std::string_view name) {
  for (Policy p : {Policy::kDeterministicUniformSlot, Policy::kBestEffort, Policy::kNaiveUnscaled,
                   Policy::kWaitForAll, Policy::kFullParticipation}) {
    if (policy_name(p) == name) return p;
  }
  return std::nullopt;
}

/// Throws InvalidSpec when `policy` cannot run on `model`.
inline void check_compatibility(Policy policy, const ArrivalModel& model) {
  if (policy == Policy::kDeterministicUniformSlot && !is_deterministic(model)) {
    throw Error(ErrorKind::kInvalidSpec, "alg1 requires deterministic arrival schedules");
  }
  if (policy == Policy::kBestEffort && is_deterministic(model)) {
    throw Error(ErrorKind::kInvalidSpec, "best_effort requires bernoulli or uniform_window arrivals");
  }
}

/// Static best-effort scale: 1/beta for Bernoulli, T for uniform windows.
inline double best_effort_weight(const ArrivalModel& model) {
  if (const auto* b = std::get_if<Bernoulli>(&model)) return 1.0 / b->beta;
  if (const auto* u = std::get_if<UniformWindow>(&model)) return static_cast<double>(u->period);
  throw Error(ErrorKind::kInvalidSpec, "best-effort weight undefined for deterministic schedules");
}

/// Policy plus the per-user constant weight it needs (best_effort only).
struct SchedulingRule {
  Policy policy = Policy::kFullParticipation;
  double static_weight = 1.0;
};

inline SchedulingRule make_rule(Policy policy, const ArrivalModel& model) {
  check_compatibility(policy, model);
  SchedulingRule rule{policy, 1.0};
  if (policy == Policy::kBestEffort) rule.static_weight = best_effort_weight(model);
  return rule;
}

struct UserEnergyState {
  int battery = 0;
  std::optional<Iteration> pending_slot;
  std::optional<double> pending_weight;
};

struct ParticipationDecision {
  bool participates = false;
  double weight = 0.0;
};

/// Read-only view of every user's state at decision time.
struct BatterySnapshot {
  std::span<const UserEnergyState> users;

  bool all_charged() const {
    return std::all_of(users.begin(), users.end(),
                       [](const UserEnergyState& s) { return s.battery == 1; });
  }
};

/// Handles E^t = 1. `inter` must be computed at t (so inter.prev == t) and
/// `stream` should be the (seed, user, kSchedule, t) stream.
inline UserEnergyState on_energy(UserEnergyState state, const SchedulingRule& rule, Iteration t,
                                 const InterArrival& inter, CounterStream& stream) {
  if (rule.policy == Policy::kFullParticipation) return state;
  state.battery = 1;
  if (rule.policy != Policy::kDeterministicUniformSlot) return state;

  if (!inter.gap || !inter.prev || *inter.prev != t) {
    throw Error(ErrorKind::kMissingGap, "alg1 arrival at t=" + std::to_string(t) +
                                            " has no inter-arrival gap");
  }
  if (state.pending_slot) {
    throw Error(ErrorKind::kInvariantViolation,
                "alg1 slot " + std::to_string(*state.pending_slot) +
                    " still pending at arrival t=" + std::to_string(t));
  }
  const Iteration gap = *inter.gap;
  const auto offset = static_cast<Iteration>(stream.uniform_index(static_cast<std::uint64_t>(gap)));
  state.pending_slot = t + offset;
  state.pending_weight = static_cast<double>(gap);
  return state;
}

inline std::pair<ParticipationDecision, UserEnergyState> decide(UserEnergyState state,
                                                                const SchedulingRule& rule,
                                                                Iteration t,
                                                                const BatterySnapshot& view) {
  ParticipationDecision d;
  switch (rule.policy) {
    case Policy::kDeterministicUniformSlot:
      if (state.pending_slot && *state.pending_slot == t) {
        if (state.battery != 1) {
          throw Error(ErrorKind::kInvariantViolation, "alg1 slot reached with an empty battery");
        }
        d = {true, *state.pending_weight};
        state.battery = 0;
        state.pending_slot.reset();
        state.pending_weight.reset();
      }
      break;
    case Policy::kBestEffort:
    case Policy::kNaiveUnscaled:
      if (state.battery == 1) {
        d = {true, rule.policy == Policy::kBestEffort ? rule.static_weight : 1.0};
        state.battery = 0;
      }
      break;
    case Policy::kWaitForAll:
      if (view.all_charged()) {
        d = {true, 1.0};
        state.battery = 0;
      }
      break;
    case Policy::kFullParticipation:
      d = {true, 1.0};
      break;
  }
  return {d, state};
}

/// Per-user energy counters, cumulative since t = 0.
struct EnergyCounters {
  std::int64_t arrivals = 0;
  std::int64_t spent = 0;   // participations (unit energy each)
  std::int64_t wasted = 0;  // arrivals that found the battery full
};

/// Runs the scheduling layer for a population of users over [0, horizon),
/// one iteration per step() call. Traces are realized up front from
/// (seed, user) and scheduling draws use (seed, user, kSchedule, t).
class ParticipationProcess {
 public:
  ParticipationProcess(const std::vector<ArrivalModel>& models, Policy policy, Iteration horizon,
                       std::uint64_t seed)
      : policy_(policy), horizon_(horizon), seed_(seed) {
    if (horizon < 1) throw Error(ErrorKind::kInvalidSpec, "horizon must be >= 1");
    const std::size_t n = models.size();
    rules_.reserve(n);
    traces_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto user = static_cast<std::uint32_t>(i);
      if (policy == Policy::kFullParticipation) {
        rules_.push_back({policy, 1.0});
        traces_.push_back(EnergyTrace{user, horizon, {}});
      } else {
        rules_.push_back(make_rule(policy, models[i]));
        traces_.push_back(realize_trace(models[i], horizon, seed, user));
      }
    }
    states_.resize(n);
    counters_.resize(n);
    decisions_.resize(n);
  }

  /// Builds a process for `n` users with no traces (full participation).
  static ParticipationProcess full(std::size_t n, Iteration horizon, std::uint64_t seed) {
    return ParticipationProcess(std::vector<ArrivalModel>(n, Bernoulli{1.0}),
                                Policy::kFullParticipation, horizon, seed);
  }

  Policy policy() const noexcept { return policy_; }
  Iteration horizon() const noexcept { return horizon_; }
  Iteration time() const noexcept { return t_; }
  std::size_t num_users() const noexcept { return states_.size(); }
  const std::vector<EnergyTrace>& traces() const noexcept { return traces_; }
  const std::vector<UserEnergyState>& states() const noexcept { return states_; }
  const std::vector<EnergyCounters>& counters() const noexcept { return counters_; }
  const std::vector<ParticipationDecision>& decisions() const noexcept { return decisions_; }

  /// Decisions for the current iteration; advances the clock by one.
  const std::vector<ParticipationDecision>& step() {
    if (t_ >= horizon_) throw Error(ErrorKind::kInvalidSpec, "participation process past horizon");
    const Iteration t = t_;
    const std::size_t n = states_.size();
    if (policy_ != Policy::kFullParticipation) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!traces_[i].arrived(t)) continue;
        ++counters_[i].arrivals;
        if (states_[i].battery == 1) ++counters_[i].wasted;
        InterArrival inter;
        if (policy_ == Policy::kDeterministicUniformSlot) inter = inter_arrival(traces_[i], t);
        CounterStream stream(seed_, static_cast<std::uint32_t>(i), Purpose::kSchedule,
                             static_cast<std::uint64_t>(t));
        states_[i] = on_energy(states_[i], rules_[i], t, inter, stream);
      }
    }
    // Snapshot before any battery drains so wait_for_all users act together.
    if (policy_ == Policy::kWaitForAll) snapshot_ = states_;
    const BatterySnapshot view{snapshot_};
    for (std::size_t i = 0; i < n; ++i) {
      auto [decision, next] = decide(states_[i], rules_[i], t, view);
      states_[i] = next;
      decisions_[i] = decision;
      if (decision.participates) ++counters_[i].spent;
    }
    ++t_;
    return decisions_;
  }

 private:
  Policy policy_;
  Iteration horizon_;
  std::uint64_t seed_;
  Iteration t_ = 0;
  std::vector<SchedulingRule> rules_;
  std::vector<EnergyTrace> traces_;
  std::vector<UserEnergyState> states_;
  std::vector<UserEnergyState> snapshot_;
  std::vector<EnergyCounters> counters_;
  std::vector<ParticipationDecision> decisions_;
};

}  // namespace ehsgd

#endif  // EHSGD_SCHEDULING_HPP_
