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

#ifndef EHSGD_TRAINING_HPP_
#define EHSGD_TRAINING_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ehsgd/energy_arrivals.hpp"
#include "ehsgd/error.hpp"
#include "ehsgd/objective.hpp"
#include "ehsgd/scheduling.hpp"
#include "ehsgd/vector_ops.hpp"

namespace ehsgd {

struct LearningRateSchedule {
  enum class Kind { kConstant, kDecay };
  Kind kind = Kind::kConstant;
  double eta0 = 0.1;
  double kappa = 0.0;  // decay only
};

/// Constant: eta0. Decay: eta0 / (1 + kappa t).
inline double learning_rate(const LearningRateSchedule& schedule, Iteration t) {
  if (schedule.kind == LearningRateSchedule::Kind::kConstant) return schedule.eta0;
  return schedule.eta0 / (1.0 + schedule.kappa * static_cast<double>(t));
}

struct Contribution {
  std::uint32_t user_id = 0;
  double p = 0.0;
  double gamma = 1.0;
  ModelVector gradient;
};

struct ContributionBatch {
  Iteration t = 0;
  std::vector<Contribution> items;
};

/// w' = w - eta * sum_{i in S_t} p_i gamma_i g_i. The empty batch leaves w
/// unchanged.
inline ModelVector server_update(const ModelVector& w, const ContributionBatch& batch, double eta) {
  std::vector<std::uint32_t> ids;
  ids.reserve(batch.items.size());
  ModelVector direction(w.size(), 0.0);
  for (const auto& c : batch.items) {
    require_same_dim(c.gradient.size(), w.size(), "server_update gradient");
    axpy(c.p * c.gamma, c.gradient, direction);
    ids.push_back(c.user_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorKind::kInvalidSpec, "duplicate user in contribution batch");
  }
  ModelVector out = w;
  axpy(-eta, direction, out);
  return out;
}

struct ObjectiveConfig {
  SyntheticSpec synthetic;
  std::optional<std::uint64_t> data_seed;  // defaults to the master seed
};

struct RunConfig {
  std::size_t num_users = 1;
  Iteration horizon = 1;
  std::vector<ArrivalModel> arrivals;  // one per user; unused by `full`
  Policy policy = Policy::kFullParticipation;
  ObjectiveConfig objective;
  LearningRateSchedule learning_rate;
  std::uint64_t seed = 0;
  Iteration metric_every = 1;
  bool check_bound = false;
  std::size_t num_groups = 1;             // metrics group of user i is i mod num_groups
  std::optional<ModelVector> initial_model;  // zeros when absent
  double constants_radius = 1.0;          // ball radius used when estimating G

  std::uint64_t data_seed() const { return objective.data_seed.value_or(seed); }
};

/// Structural checks shared by run() and the config parser.
inline void validate(const RunConfig& cfg) {
  if (cfg.num_users < 1) throw ValidationError("N", "must be >= 1");
  if (cfg.horizon < 1) throw ValidationError("horizon", "must be >= 1");
  if (cfg.metric_every < 1) throw ValidationError("metric_every", "must be >= 1");
  if (cfg.num_groups < 1) throw ValidationError("groups", "must be >= 1");
  if (cfg.objective.synthetic.num_users != cfg.num_users) {
    throw ValidationError("objective", "user count differs from N");
  }
  if (!(cfg.learning_rate.eta0 > 0.0)) throw ValidationError("eta", "must be > 0");
  if (cfg.learning_rate.kappa < 0.0) throw ValidationError("learning_rate.kappa", "must be >= 0");
  if (cfg.initial_model && cfg.initial_model->size() != cfg.objective.synthetic.dim) {
    throw ValidationError("w0", "dimension differs from objective.dim");
  }
  if (cfg.policy == Policy::kFullParticipation) return;
  if (cfg.arrivals.size() != cfg.num_users) {
    throw ValidationError("arrivals", "need one arrival model per user");
  }
  for (std::size_t i = 0; i < cfg.arrivals.size(); ++i) {
    const std::string field = "arrivals[" + std::to_string(i) + "]";
    try {
      validate(cfg.arrivals[i], cfg.horizon);
      check_compatibility(cfg.policy, cfg.arrivals[i]);
    } catch (const Error& e) {
      throw ValidationError(field, e.what());
    }
  }
}

/// Rejects learning rates above min{1/(2 mu), 1/L}.
inline void check_learning_rate_premise(double eta, double mu, double L) {
  const double limit = std::min(1.0 / (2.0 * mu), 1.0 / L);
  if (eta > limit) {
    throw Error(ErrorKind::kPremiseViolated, "eta=" + std::to_string(eta) +
                                                 " exceeds min{1/(2mu), 1/L}=" + std::to_string(limit));
  }
}

/// State after `iteration` server updates: F(w^(t)), the gap to F*, |S_{t-1}|
/// (zero for the initial row) and energy totals over iterations [0, t).
struct MetricsRow {
  Iteration iteration = 0;
  double global_loss = 0.0;
  double loss_gap = 0.0;
  std::int64_t num_participants = 0;
  std::int64_t energy_spent = 0;
  std::int64_t energy_wasted = 0;
  std::vector<std::int64_t> group_participants;
};

struct MetricsTrace {
  std::vector<MetricsRow> rows;
  ModelVector final_model;
  double optimum_loss = 0.0;
  std::int64_t gradient_evaluations = 0;
  std::int64_t model_updates = 0;
  std::int64_t energy_arrivals = 0;
  std::vector<std::int64_t> group_participations;  // totals over the run
};

/// Observer invoked after every iteration with (t, w^(t+1), decisions).
struct NoObserver {
  void operator()(Iteration, const ModelVector&, const std::vector<ParticipationDecision>&) const {}
};

/// Runs `cfg` on a prebuilt objective whose optimum loss is `optimum_loss`.
template <typename Observer = NoObserver>
MetricsTrace run(const RunConfig& cfg, const Objective& obj, double optimum_loss,
                 Observer&& observer = {}) {
  validate(cfg);
  if (obj.num_users() != cfg.num_users) throw ValidationError("objective", "user count differs from N");
  if (cfg.check_bound) {
    double mu = obj.local_strong_convexity(0);
    double L = 0.0;
    for (std::size_t i = 0; i < obj.num_users(); ++i) {
      mu = std::min(mu, obj.local_strong_convexity(i));
      L = std::max(L, obj.local_smoothness(i));
    }
    check_learning_rate_premise(cfg.learning_rate.eta0, mu, L);
  }

  const std::size_t n = cfg.num_users;
  ParticipationProcess process = cfg.policy == Policy::kFullParticipation
                                     ? ParticipationProcess::full(n, cfg.horizon, cfg.seed)
                                     : ParticipationProcess(cfg.arrivals, cfg.policy, cfg.horizon, cfg.seed);

  MetricsTrace trace;
  trace.optimum_loss = optimum_loss;
  trace.group_participations.assign(cfg.num_groups, 0);
  ModelVector w = cfg.initial_model.value_or(ModelVector(obj.dim(), 0.0));
  require_same_dim(w.size(), obj.dim(), "initial model");

  auto record = [&](Iteration t, std::int64_t participants, std::vector<std::int64_t> groups) {
    MetricsRow row;
    row.iteration = t;
    row.global_loss = obj.global_loss(w);
    row.loss_gap = row.global_loss - optimum_loss;
    if (row.loss_gap < -1e-9) {
      throw Error(ErrorKind::kInvariantViolation,
                  "loss below the optimum by " + std::to_string(-row.loss_gap));
    }
    row.num_participants = participants;
    for (const auto& c : process.counters()) {
      row.energy_spent += c.spent;
      row.energy_wasted += c.wasted;
    }
    row.group_participants = std::move(groups);
    trace.rows.push_back(std::move(row));
  };

  record(0, 0, std::vector<std::int64_t>(cfg.num_groups, 0));
  ContributionBatch batch;
  for (Iteration t = 0; t < cfg.horizon; ++t) {
    const auto& decisions = process.step();
    batch.t = t;
    batch.items.clear();
    std::vector<std::int64_t> groups(cfg.num_groups, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!decisions[i].participates) continue;
      batch.items.push_back({static_cast<std::uint32_t>(i), obj.weight(i), decisions[i].weight,
                             obj.stochastic_gradient(i, w, cfg.seed, static_cast<std::uint64_t>(t))});
      ++groups[i % cfg.num_groups];
    }
    trace.gradient_evaluations += static_cast<std::int64_t>(batch.items.size());
    if (!batch.items.empty()) ++trace.model_updates;
    for (std::size_t k = 0; k < cfg.num_groups; ++k) trace.group_participations[k] += groups[k];
    w = server_update(w, batch, learning_rate(cfg.learning_rate, t));
    observer(t, w, decisions);
    const Iteration done = t + 1;
    if (done % cfg.metric_every == 0 || done == cfg.horizon) {
      record(done, static_cast<std::int64_t>(batch.items.size()), std::move(groups));
    }
  }

  if (cfg.policy == Policy::kWaitForAll && trace.model_updates == 0) {
    throw Error(ErrorKind::kStarvationDetected,
                "wait_for_all made no update within the horizon; arrival periods never align");
  }
  for (const auto& c : process.counters()) trace.energy_arrivals += c.arrivals;
  trace.final_model = std::move(w);
  return trace;
}

/// Builds the objective from the config's synthetic spec and runs it.
inline MetricsTrace run(const RunConfig& cfg) {
  validate(cfg);
  const Objective obj = make_synthetic(cfg.objective.synthetic, cfg.data_seed());
  const Optimum opt = solve_optimum(obj);
  return run(cfg, obj, opt.loss);
}

}  // namespace ehsgd

#endif  // EHSGD_TRAINING_HPP_
