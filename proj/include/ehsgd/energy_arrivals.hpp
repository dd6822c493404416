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

// Energy-arrival models and inter-arrival bookkeeping.
//
// A user's harvesting process is realized into a binary trace E^t over
// [0, horizon). Three models are supported: a known deterministic schedule,
// i.i.d. Bernoulli(beta) arrivals, and one arrival at a uniformly random slot
// of every window [kT, (k+1)T).

#ifndef EHSGD_ENERGY_ARRIVALS_HPP_
#define EHSGD_ENERGY_ARRIVALS_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ehsgd/error.hpp"
#include "ehsgd/random.hpp"

namespace ehsgd {

using Iteration = std::int64_t;

struct DeterministicSchedule {
  std::vector<Iteration> times;  // strictly increasing, each in [0, horizon)
};

struct Bernoulli {
  double beta = 1.0;  // in (0, 1]
};

struct UniformWindow {
  Iteration period = 1;  // >= 1
};

using ArrivalModel = std::variant<DeterministicSchedule, Bernoulli, UniformWindow>;

inline bool is_deterministic(const ArrivalModel& m) {
  return std::holds_alternative<DeterministicSchedule>(m);
}

/// Arrivals at offset, offset + period, ... below horizon.
inline DeterministicSchedule periodic_schedule(Iteration period, Iteration horizon,
                                               Iteration offset = 0) {
  if (period < 1 || offset < 0) {
    throw Error(ErrorKind::kInvalidModel, "periodic schedule needs period >= 1, offset >= 0");
  }
  DeterministicSchedule s;
  for (Iteration t = offset; t < horizon; t += period) s.times.push_back(t);
  return s;
}

inline void validate(const ArrivalModel& model, Iteration horizon) {
  if (horizon < 1) throw Error(ErrorKind::kInvalidModel, "horizon must be >= 1");
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, DeterministicSchedule>) {
          for (std::size_t k = 0; k < m.times.size(); ++k) {
            const Iteration t = m.times[k];
            if (t < 0 || t >= horizon) {
              throw Error(ErrorKind::kInvalidModel,
                          "schedule time " + std::to_string(t) + " outside [0, " +
                              std::to_string(horizon) + ")");
            }
            if (k > 0 && t <= m.times[k - 1]) {
              throw Error(ErrorKind::kInvalidModel, "schedule times must be strictly increasing");
            }
          }
        } else if constexpr (std::is_same_v<M, Bernoulli>) {
          if (!(m.beta > 0.0 && m.beta <= 1.0)) {
            throw Error(ErrorKind::kInvalidModel, "beta must lie in (0, 1]");
          }
        } else {
          if (m.period < 1) throw Error(ErrorKind::kInvalidModel, "period must be >= 1");
        }
      },
      model);
}

struct EnergyTrace {
  std::uint32_t user_id = 0;
  Iteration horizon = 0;
  std::vector<std::uint8_t> arrivals;  // E^t in {0, 1}

  bool arrived(Iteration t) const { return arrivals[static_cast<std::size_t>(t)] != 0; }

  Iteration count() const {
    return static_cast<Iteration>(std::count(arrivals.begin(), arrivals.end(), 1));
  }
};

/// Realize `model` for `user` over [0, horizon).
///
/// Bernoulli draws use stream (seed, user, kArrival, t); uniform windows use
/// (seed, user, kArrival, k) for window k and place the arrival at
/// kT + uniform_index(T). A trailing partial window keeps its arrival only if
/// the drawn slot falls before the horizon, so a trace is always a prefix of
/// the same user's trace at a longer horizon.
inline EnergyTrace realize_trace(const ArrivalModel& model, Iteration horizon,
                                 std::uint64_t seed, std::uint32_t user) {
  validate(model, horizon);
  EnergyTrace trace{user, horizon, std::vector<std::uint8_t>(static_cast<std::size_t>(horizon), 0)};
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, DeterministicSchedule>) {
          for (Iteration t : m.times) trace.arrivals[static_cast<std::size_t>(t)] = 1;
        } else if constexpr (std::is_same_v<M, Bernoulli>) {
          for (Iteration t = 0; t < horizon; ++t) {
            CounterStream s(seed, user, Purpose::kArrival, static_cast<std::uint64_t>(t));
            trace.arrivals[static_cast<std::size_t>(t)] = s.bernoulli(m.beta) ? 1 : 0;
          }
        } else {
          for (Iteration start = 0, k = 0; start < horizon; start += m.period, ++k) {
            CounterStream s(seed, user, Purpose::kArrival, static_cast<std::uint64_t>(k));
            const Iteration t = start + static_cast<Iteration>(
                                            s.uniform_index(static_cast<std::uint64_t>(m.period)));
            if (t < horizon) trace.arrivals[static_cast<std::size_t>(t)] = 1;
          }
        }
      },
      model);
  return trace;
}

/// Neighbouring arrivals around iteration t.
///
/// `prev` is the latest arrival at or before t (empty before the first
/// arrival). `next` is the earliest arrival strictly after t; when none
/// exists it is the horizon and `next_is_horizon_end` is set. `gap` is
/// next - prev whenever prev exists.
struct InterArrival {
  std::optional<Iteration> prev;
  Iteration next = 0;
  bool next_is_horizon_end = false;
  std::optional<Iteration> gap;
};

inline InterArrival inter_arrival(const EnergyTrace& trace, Iteration t) {
  if (t < 0 || t >= trace.horizon) {
    throw Error(ErrorKind::kInvalidSpec, "inter_arrival: t outside [0, horizon)");
  }
  InterArrival out;
  for (Iteration k = t; k >= 0; --k) {
    if (trace.arrived(k)) {
      out.prev = k;
      break;
    }
  }
  out.next = trace.horizon;
  out.next_is_horizon_end = true;
  for (Iteration k = t + 1; k < trace.horizon; ++k) {
    if (trace.arrived(k)) {
      out.next = k;
      out.next_is_horizon_end = false;
      break;
    }
  }
  if (out.prev) out.gap = out.next - *out.prev;
  return out;
}

/// T_max = max over t in [0, horizon) of the inter-arrival gap T^t, taken
/// literally over the realized trace (tail gap included). Returns 1 when the
/// trace has no arrivals, since such a user never participates.
inline Iteration max_gap(const EnergyTrace& trace) {
  Iteration best = 1;
  std::optional<Iteration> last;
  for (Iteration t = 0; t < trace.horizon; ++t) {
    if (!trace.arrived(t)) continue;
    if (last) best = std::max(best, t - *last);
    last = t;
  }
  if (last) best = std::max(best, trace.horizon - *last);
  return best;
}

}  // namespace ehsgd

#endif  // EHSGD_ENERGY_ARRIVALS_HPP_
