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

// Verifier suites: fixed statistical scenarios for the scheduling layer and
// the end-to-end convergence-bound experiment. Shared by the command-line
// tool and the acceptance tests.

#ifndef EHSGD_VERIFIERS_HPP_
#define EHSGD_VERIFIERS_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ehsgd/analysis.hpp"
#include "ehsgd/energy_arrivals.hpp"
#include "ehsgd/objective.hpp"
#include "ehsgd/random.hpp"
#include "ehsgd/scheduling.hpp"
#include "ehsgd/training.hpp"

namespace ehsgd {

inline nlohmann::json to_json(const VerifierReport& r) {
  auto scalar_or_array = [](const std::vector<double>& v) {
    return v.size() == 1 ? nlohmann::json(v.front()) : nlohmann::json(v);
  };
  return {{"test", r.test},
          {"estimate", scalar_or_array(r.estimate)},
          {"target", scalar_or_array(r.target)},
          {"stderr", scalar_or_array(r.stderr_)},
          {"pass", r.pass},
          {"negative_control", r.negative_control},
          {"draws", r.draws}};
}

struct VerifierOptions {
  std::uint64_t seed = 20240601;
  std::size_t draws = 200'000;
  std::size_t participation_draws = 100'000;
  std::size_t bound_seeds = 200;
  unsigned jobs = 0;
};

/// N frozen gradients of dimension d with N(0, 1) entries.
inline std::vector<ModelVector> frozen_gradients(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::vector<ModelVector> g(n, ModelVector(d));
  for (std::size_t i = 0; i < n; ++i) {
    CounterStream s(seed, static_cast<std::uint32_t>(i), Purpose::kConstants, 0xF00Dull);
    for (auto& v : g[i]) v = s.normal();
  }
  return g;
}

namespace scenarios {

inline const std::vector<double> kFiveUserWeights = {0.1, 0.15, 0.2, 0.25, 0.3};

/// Five deterministic schedules probed at t = 13, inside an interior
/// interval of every user (gaps 1, 8, 5, 6, 3).
inline ParticipationScenario alg1_five_users(std::uint64_t seed) {
  ParticipationScenario sc;
  sc.horizon = 40;
  sc.probe = 13;
  sc.policy = Policy::kDeterministicUniformSlot;
  sc.models = {periodic_schedule(1, sc.horizon),
               DeterministicSchedule{{0, 3, 7, 12, 20, 31}},
               periodic_schedule(5, sc.horizon),
               DeterministicSchedule{{2, 11, 17, 25}},
               DeterministicSchedule{{1, 13, 16, 39}}};
  sc.p = kFiveUserWeights;
  sc.seed = seed;
  return sc;
}

inline ParticipationScenario bernoulli_five_users(std::uint64_t seed, Policy policy = Policy::kBestEffort) {
  ParticipationScenario sc;
  sc.horizon = 4;
  sc.probe = 3;
  sc.policy = policy;
  sc.models = {Bernoulli{1.0}, Bernoulli{0.5}, Bernoulli{0.25}, Bernoulli{0.2}, Bernoulli{0.1}};
  sc.p = kFiveUserWeights;
  sc.seed = seed;
  return sc;
}

/// Uniform windows probed at t = 7, inside a complete window for every user.
inline ParticipationScenario uniform_five_users(std::uint64_t seed) {
  ParticipationScenario sc;
  sc.horizon = 10;
  sc.probe = 7;
  sc.policy = Policy::kBestEffort;
  sc.models = {UniformWindow{1}, UniformWindow{2}, UniformWindow{4}, UniformWindow{5}, UniformWindow{10}};
  sc.p = kFiveUserWeights;
  sc.seed = seed;
  return sc;
}

/// Unscaled participation with beta = (1, 0.2), p = (1/2, 1/2), g = (1, 1):
/// the aggregate mean is 0.6 while the target is 1.
inline ParticipationScenario naive_negative_control(std::uint64_t seed) {
  ParticipationScenario sc;
  sc.horizon = 1;
  sc.probe = 0;
  sc.policy = Policy::kNaiveUnscaled;
  sc.models = {Bernoulli{1.0}, Bernoulli{0.2}};
  sc.p = {0.5, 0.5};
  sc.seed = seed;
  return sc;
}

/// One user, arrivals {0, 4}, probed at t = 1 inside the interval [0, 4).
inline ParticipationScenario single_interval_of_four(std::uint64_t seed) {
  ParticipationScenario sc;
  sc.horizon = 8;
  sc.probe = 1;
  sc.policy = Policy::kDeterministicUniformSlot;
  sc.models = {DeterministicSchedule{{0, 4}}};
  sc.p = {1.0};
  sc.seed = seed;
  return sc;
}

inline ParticipationScenario mixed_bernoulli(std::uint64_t seed, double beta0 = 0.5, double beta1 = 0.25) {
  ParticipationScenario sc;
  sc.horizon = 1;
  sc.probe = 0;
  sc.policy = Policy::kBestEffort;
  sc.models = {Bernoulli{beta0}, Bernoulli{beta1}};
  sc.p = {0.5, 0.5};
  sc.seed = seed;
  return sc;
}

/// One user, arrivals {0, 6} over horizon 12; [0, 6) is an interior interval
/// of length 6.
inline ParticipationScenario interval_of_six(std::uint64_t seed) {
  ParticipationScenario sc;
  sc.horizon = 12;
  sc.probe = 0;
  sc.policy = Policy::kDeterministicUniformSlot;
  sc.models = {DeterministicSchedule{{0, 6}}};
  sc.p = {1.0};
  sc.seed = seed;
  return sc;
}

}  // namespace scenarios

inline std::vector<VerifierReport> unbiasedness_suite(const VerifierOptions& opt) {
  const auto g = frozen_gradients(5, 8, opt.seed);
  std::vector<VerifierReport> out;
  out.push_back(unbiasedness_test(scenarios::alg1_five_users(opt.seed), g, opt.draws, opt.jobs));
  out.back().test += "/deterministic";
  out.push_back(unbiasedness_test(scenarios::bernoulli_five_users(opt.seed), g, opt.draws, opt.jobs));
  out.back().test += "/bernoulli";
  out.push_back(unbiasedness_test(scenarios::uniform_five_users(opt.seed), g, opt.draws, opt.jobs));
  out.back().test += "/uniform_window";

  // Unscaled participation is biased: its mean matches sum_i beta_i p_i g_i.
  const auto naive = scenarios::bernoulli_five_users(opt.seed, Policy::kNaiveUnscaled);
  VerifierReport witness = unbiasedness_test(naive, g, opt.draws, opt.jobs);
  witness.test = "bias_witness/naive/bernoulli";
  witness.target.assign(g.front().size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    axpy(std::get<Bernoulli>(naive.models[i]).beta * naive.p[i], g[i], witness.target);
  }
  witness.pass = within_band(witness.estimate, witness.target, witness.stderr_);
  out.push_back(std::move(witness));

  VerifierReport control = unbiasedness_test(scenarios::naive_negative_control(opt.seed),
                                             {ModelVector{1.0}, ModelVector{1.0}}, opt.draws, opt.jobs);
  control.test += "/negative_control";
  control.negative_control = true;
  out.push_back(std::move(control));
  return out;
}

inline std::vector<VerifierReport> participation_suite(const VerifierOptions& opt) {
  return {slot_frequency_test(scenarios::interval_of_six(opt.seed), 0, 0, 6, opt.participation_draws, opt.jobs)};
}

inline std::vector<VerifierReport> variance_suite(const VerifierOptions& opt) {
  std::vector<VerifierReport> out;

  const auto single = scenarios::single_interval_of_four(opt.seed);
  const std::vector<ModelVector> unit = {{1.0, 0.0, 0.0}};
  out.push_back(variance_exact_check(single, unit, opt.draws, opt.jobs));
  out.back().test += "/interval_of_four";
  {
    const EnergyTrace trace = realize_trace(single.models[0], single.horizon, single.seed, 0);
    const std::vector<double> t_max = {bound_t_max(single.models[0], trace)};
    out.push_back(variance_term_check(single, unit, t_max, 1.0, opt.draws, opt.jobs));
    out.back().test += "/interval_of_four";
  }

  const auto mixed = scenarios::mixed_bernoulli(opt.seed);
  const std::vector<ModelVector> axes = {{1.0, 0.0}, {0.0, 1.0}};
  out.push_back(variance_exact_check(mixed, axes, opt.draws, opt.jobs));
  out.back().test += "/mixed_bernoulli";
  out.push_back(variance_term_check(mixed, axes, std::vector<double>{2.0, 4.0}, 1.0, opt.draws, opt.jobs));
  out.back().test += "/mixed_bernoulli";

  const auto mixed2 = scenarios::mixed_bernoulli(opt.seed, 0.8, 0.1);
  out.push_back(variance_exact_check(mixed2, axes, opt.draws, opt.jobs));
  out.back().test += "/mixed_bernoulli_0.8_0.1";

  const auto always = scenarios::mixed_bernoulli(opt.seed, 1.0, 1.0);
  out.push_back(variance_exact_check(always, axes, opt.draws, opt.jobs));
  out.back().test += "/always_participate";

  const auto five = scenarios::alg1_five_users(opt.seed);
  const auto g = frozen_gradients(5, 8, opt.seed);
  double G = 0.0;
  std::vector<double> t_max;
  for (std::size_t i = 0; i < five.models.size(); ++i) {
    G = std::max(G, norm(g[i]));
    const EnergyTrace trace = realize_trace(five.models[i], five.horizon, five.seed, static_cast<std::uint32_t>(i));
    t_max.push_back(bound_t_max(five.models[i], trace));
  }
  out.push_back(variance_term_check(five, g, t_max, G, opt.draws, opt.jobs));
  out.back().test += "/five_users";
  out.push_back(variance_exact_check(five, g, opt.draws, opt.jobs));
  out.back().test += "/five_users";
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end bound experiment

struct BoundExperiment {
  RunConfig config;  // check_bound is forced on
  std::size_t seeds = 200;
  std::uint64_t first_seed = 1;
  unsigned jobs = 0;
  double rate_tolerance = 0.10;
};

struct BoundExperimentResult {
  ProblemConstants constants;
  BoundTerms terms;
  double initial_gap = 0.0;
  std::vector<double> mean_gap;         // per iteration 0..T
  std::vector<double> mean_iterate_err; // ||mean_s w_t - w*|| for t in the fit window
  Iteration window_end = 0;
  std::vector<VerifierReport> reports;
};

namespace detail {

/// exp of the least-squares slope of log(y_t) against t over t in [0, n).
inline double fitted_rate(std::span<const double> y) {
  const auto n = static_cast<double>(y.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double x = static_cast<double>(t);
    const double ly = std::log(y[t]);
    sx += x;
    sy += ly;
    sxx += x * x;
    sxy += x * ly;
  }
  return std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
}

}  // namespace detail

/// The default quadratic instance: N = 10, d = 5, one point per user,
/// alg1 with periods 1 + (i mod 8), eta = 1/4, T = 2000, w0 = (4, ..., 4).
inline RunConfig default_bound_config() {
  RunConfig cfg;
  cfg.num_users = 10;
  cfg.horizon = 2000;
  cfg.policy = Policy::kDeterministicUniformSlot;
  cfg.objective.synthetic = {10, 5, 1, PartitionMode::kIid, QuadraticLoss{}, 1, 0.9, 1.0};
  cfg.objective.data_seed = 42;
  cfg.learning_rate = {LearningRateSchedule::Kind::kConstant, 0.25, 0.0};
  for (std::size_t i = 0; i < cfg.num_users; ++i) {
    cfg.arrivals.push_back(periodic_schedule(static_cast<Iteration>(1 + i % 8), cfg.horizon));
  }
  cfg.initial_model = ModelVector(5, 4.0);
  cfg.check_bound = true;
  return cfg;
}

/// Runs `seeds` independent replicas and checks
///  - mean final gap <= bound + 3 stderr,
///  - fitted per-step decay of the mean gap <= (1 + tol)(1 - eta mu),
///  - fitted contraction of ||E[w_t] - w*|| within tol of (1 - eta mu),
///  - every observed per-point squared gradient norm <= G^2,
/// the rate fits using the early window where the mean gap stays above ten
/// times its late-run level.
inline BoundExperimentResult run_bound_experiment(const BoundExperiment& exp) {
  RunConfig cfg = exp.config;
  cfg.check_bound = true;
  cfg.metric_every = 1;
  if (cfg.learning_rate.kind != LearningRateSchedule::Kind::kConstant) {
    throw Error(ErrorKind::kPremiseViolated, "the bound experiment needs a constant learning rate");
  }
  validate(cfg);
  const Objective obj = make_synthetic(cfg.objective.synthetic, cfg.data_seed());
  const Optimum opt = solve_optimum(obj);
  const ModelVector w0 = cfg.initial_model.value_or(ModelVector(obj.dim(), 0.0));

  BoundExperimentResult res;
  const double radius = std::max(cfg.constants_radius, std::sqrt(squared_distance(w0, opt.w)));
  res.constants = estimate_constants(obj, opt.w, {radius, 256, cfg.data_seed(), 1.1});
  res.initial_gap = obj.global_loss(w0) - opt.loss;

  BoundInputs in;
  in.mu = res.constants.mu;
  in.L = res.constants.L;
  in.eta = cfg.learning_rate.eta0;
  in.T = cfg.horizon;
  in.initial_gap = res.initial_gap;
  in.p = obj.weights();
  in.G = res.constants.G;
  for (std::size_t i = 0; i < cfg.num_users; ++i) {
    if (cfg.policy == Policy::kFullParticipation) {
      in.t_max.push_back(1.0);
    } else {
      const EnergyTrace trace = realize_trace(cfg.arrivals[i], cfg.horizon, cfg.seed, static_cast<std::uint32_t>(i));
      in.t_max.push_back(bound_t_max(cfg.arrivals[i], trace));
    }
  }
  res.terms = bound_terms(in);

  constexpr std::size_t kTracked = 64;  // iterations whose mean iterate is kept
  const auto T = static_cast<std::size_t>(cfg.horizon);
  const std::size_t tracked = std::min(kTracked, T + 1);
  std::vector<std::vector<double>> gaps(exp.seeds);
  std::vector<std::vector<ModelVector>> iterates(exp.seeds);
  std::vector<double> max_g2(exp.seeds, 0.0);

  auto one = [&](std::size_t s) {
    RunConfig c = cfg;
    c.seed = exp.first_seed + s;
    std::vector<ModelVector> ws;
    ws.reserve(tracked);
    ws.push_back(w0);
    double g2 = 0.0;
    const MetricsTrace tr = run(c, obj, opt.loss, [&](Iteration t, const ModelVector& w, const auto&) {
      if (static_cast<std::size_t>(t) + 1 < tracked) ws.push_back(w);
      for (const auto& ds : obj.datasets()) {
        for (const auto& pt : ds.points) g2 = std::max(g2, squared_norm(obj.point_gradient(w, pt)));
      }
    });
    for (const auto& ds : obj.datasets()) {
      for (const auto& pt : ds.points) g2 = std::max(g2, squared_norm(obj.point_gradient(w0, pt)));
    }
    std::vector<double> gp(T + 1);
    for (const auto& row : tr.rows) gp[static_cast<std::size_t>(row.iteration)] = row.loss_gap;
    gaps[s] = std::move(gp);
    iterates[s] = std::move(ws);
    max_g2[s] = g2;
  };
  unsigned jobs = exp.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : exp.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, exp.seeds));
  {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        for (std::size_t s = j; s < exp.seeds; s += jobs) one(s);
      });
    }
    for (auto& th : pool) th.join();
  }

  const auto S = static_cast<double>(exp.seeds);
  res.mean_gap.assign(T + 1, 0.0);
  for (const auto& gp : gaps) {
    for (std::size_t t = 0; t <= T; ++t) res.mean_gap[t] += gp[t] / S;
  }
  double var = 0.0;
  for (const auto& gp : gaps) var += (gp[T] - res.mean_gap[T]) * (gp[T] - res.mean_gap[T]);
  const double se_final = std::sqrt(var / (S - 1.0) / S);

  VerifierReport final_gap;
  final_gap.test = "bound/final_gap";
  final_gap.estimate = {res.mean_gap[T]};
  final_gap.target = {res.terms.total};
  final_gap.stderr_ = {se_final};
  final_gap.pass = res.terms.total > 0.0 && res.mean_gap[T] <= res.terms.total + kStandardErrors * se_final;
  final_gap.draws = exp.seeds;

  // Late-run level: mean gap averaged over the second half of the run.
  double late = 0.0;
  for (std::size_t t = T / 2; t <= T; ++t) late += res.mean_gap[t];
  late /= static_cast<double>(T - T / 2 + 1);
  std::size_t end = 0;
  while (end + 1 < tracked && res.mean_gap[end + 1] >= 10.0 * late) ++end;
  res.window_end = static_cast<Iteration>(end);

  const double contraction = 1.0 - in.eta * in.mu;
  VerifierReport gap_rate;
  gap_rate.test = "bound/gap_rate";
  gap_rate.target = {contraction};
  gap_rate.draws = exp.seeds;
  VerifierReport iter_rate;
  iter_rate.test = "bound/mean_iterate_rate";
  iter_rate.target = {contraction};
  iter_rate.draws = exp.seeds;
  if (end >= 3) {
    const double r_gap = detail::fitted_rate(std::span<const double>(res.mean_gap).first(end + 1));
    for (std::size_t t = 0; t <= end; ++t) {
      ModelVector mean(obj.dim(), 0.0);
      for (const auto& ws : iterates) axpy(1.0 / S, ws[t], mean);
      res.mean_iterate_err.push_back(std::sqrt(squared_distance(mean, opt.w)));
    }
    const double r_iter = detail::fitted_rate(res.mean_iterate_err);
    gap_rate.estimate = {r_gap};
    gap_rate.pass = r_gap <= (1.0 + exp.rate_tolerance) * contraction;
    iter_rate.estimate = {r_iter};
    iter_rate.pass = std::abs(r_iter - contraction) <= exp.rate_tolerance * contraction;
  } else {
    gap_rate.estimate = {std::nan("")};
    iter_rate.estimate = {std::nan("")};
  }
  gap_rate.stderr_ = {0.0};
  iter_rate.stderr_ = {0.0};

  VerifierReport moment;
  moment.test = "bound/second_moment_witness";
  moment.estimate = {*std::max_element(max_g2.begin(), max_g2.end())};
  moment.target = {res.constants.G * res.constants.G};
  moment.stderr_ = {0.0};
  moment.pass = moment.estimate[0] <= moment.target[0];
  moment.draws = exp.seeds;

  res.reports = {final_gap, gap_rate, iter_rate, moment};
  return res;
}

inline std::vector<VerifierReport> bound_suite(const VerifierOptions& opt) {
  BoundExperiment exp;
  exp.config = default_bound_config();
  exp.seeds = opt.bound_seeds;
  exp.jobs = opt.jobs;
  return run_bound_experiment(exp).reports;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"unbiasedness", "participation", "variance", "bound", "all"};
  return names;
}

/// Dispatches a suite by name; std::nullopt for an unknown name.
inline std::optional<std::vector<VerifierReport>> run_suite(const std::string& name, const VerifierOptions& opt) {
  if (name == "unbiasedness") return unbiasedness_suite(opt);
  if (name == "participation") return participation_suite(opt);
  if (name == "variance") return variance_suite(opt);
  if (name == "bound") return bound_suite(opt);
  if (name == "all") {
    std::vector<VerifierReport> all;
    for (const auto& part : {unbiasedness_suite(opt), participation_suite(opt), variance_suite(opt), bound_suite(opt)}) {
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  return std::nullopt;
}

}  // namespace ehsgd

#endif  // EHSGD_VERIFIERS_HPP_
