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

// Convergence-bound machinery and Monte Carlo verifiers for the scheduling
// layer.
//
// The bound for constant step size eta <= min{1/(2mu), 1/L} after T steps is
//
//   (L/mu) (1 - eta mu)^T (F(w0) - F* - eta C / 2) + eta L C / (2 mu),
//   C = (sum_i (T_i,max - 1) p_i^2 + sum_i sum_j p_i p_j) G^2.
//
// The verifiers replay the participation process many times at a fixed probe
// iteration and compare sample moments of the scaled aggregate
// sum_{i in S} p_i gamma_i g_i against their analytic values. Every check
// uses a 3-standard-error acceptance band.

#ifndef EHSGD_ANALYSIS_HPP_
#define EHSGD_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ehsgd/energy_arrivals.hpp"
#include "ehsgd/error.hpp"
#include "ehsgd/random.hpp"
#include "ehsgd/scheduling.hpp"
#include "ehsgd/vector_ops.hpp"

namespace ehsgd {

inline constexpr double kStandardErrors = 3.0;

inline void check_simplex(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error(ErrorKind::kInvalidWeights, "weights must be non-negative");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidWeights, "weights sum to " + std::to_string(s) + ", not 1");
  }
}

/// sum_i sum_j p_i p_j G^2, evaluated term by term.
inline double double_sum_term(std::span<const double> p, double G) {
  double s = 0.0;
  for (double pi : p) {
    for (double pj : p) s += pi * pj;
  }
  return s * G * G;
}

inline double compute_C(std::span<const double> p, std::span<const double> t_max, double G) {
  check_simplex(p);
  require_same_dim(p.size(), t_max.size(), "compute_C");
  double first = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(t_max[i] >= 1.0)) throw Error(ErrorKind::kInvalidSpec, "T_max entries must be >= 1");
    first += (t_max[i] - 1.0) * p[i] * p[i];
  }
  return first * G * G + double_sum_term(p, G);
}

struct BoundInputs {
  double mu = 1.0;
  double L = 1.0;
  double eta = 0.1;
  Iteration T = 0;
  double initial_gap = 0.0;  // F(w0) - F*
  std::vector<double> p;
  std::vector<double> t_max;
  double G = 0.0;
};

struct BoundTerms {
  double C = 0.0;
  double geometric = 0.0;  // (L/mu)(1 - eta mu)^T (gap0 - eta C / 2)
  double floor = 0.0;      // eta L C / (2 mu)
  double total = 0.0;
};

inline BoundTerms bound_terms(const BoundInputs& in) {
  if (!(in.mu > 0.0) || in.L < in.mu) throw Error(ErrorKind::kInvalidSpec, "need 0 < mu <= L");
  if (in.T < 0) throw Error(ErrorKind::kInvalidSpec, "T must be >= 0");
  const double limit = std::min(1.0 / (2.0 * in.mu), 1.0 / in.L);
  if (!(in.eta > 0.0) || in.eta > limit) {
    throw Error(ErrorKind::kPremiseViolated,
                "eta must lie in (0, min{1/(2mu), 1/L}] = (0, " + std::to_string(limit) + "]");
  }
  BoundTerms b;
  b.C = compute_C(in.p, in.t_max, in.G);
  const double contraction = std::pow(1.0 - in.eta * in.mu, static_cast<double>(in.T));
  b.geometric = (in.L / in.mu) * contraction * (in.initial_gap - in.eta * b.C / 2.0);
  b.floor = in.eta * in.L * b.C / (2.0 * in.mu);
  b.total = b.geometric + b.floor;
  return b;
}

inline double convergence_bound(const BoundInputs& in) { return bound_terms(in).total; }

/// T_i,max for the bound: the realized maximum gap for deterministic
/// schedules, 1/beta for Bernoulli arrivals and T for uniform windows.
inline double bound_t_max(const ArrivalModel& model, const EnergyTrace& trace) {
  if (is_deterministic(model)) return static_cast<double>(max_gap(trace));
  return best_effort_weight(model);
}

// ---------------------------------------------------------------------------
// Monte Carlo moments

struct Moments {
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::size_t count = 0;
};

namespace detail {

struct WelfordBlock {
  double n = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;
};

inline WelfordBlock merge(const WelfordBlock& a, const WelfordBlock& b) {
  if (a.n == 0.0) return b;
  if (b.n == 0.0) return a;
  WelfordBlock out;
  out.n = a.n + b.n;
  out.mean.resize(a.mean.size());
  out.m2.resize(a.mean.size());
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    const double delta = b.mean[k] - a.mean[k];
    out.mean[k] = a.mean[k] + delta * b.n / out.n;
    out.m2[k] = a.m2[k] + b.m2[k] + delta * delta * a.n * b.n / out.n;
  }
  return out;
}

inline WelfordBlock merge_range(std::span<const WelfordBlock> blocks) {
  if (blocks.size() == 1) return blocks.front();
  const std::size_t half = blocks.size() / 2;
  return merge(merge_range(blocks.first(half)), merge_range(blocks.subspan(half)));
}

}  // namespace detail

/// Sample mean and standard error of a K-vector statistic over `draws`
/// independent draws. `draw(m, out)` fills `out` for draw index m. Draws are
/// grouped into fixed chunks whose summaries merge pairwise in chunk order,
/// so the result is independent of `jobs`.
inline Moments monte_carlo_moments(std::size_t draws, std::size_t k,
                                   const std::function<void(std::uint64_t, std::span<double>)>& draw,
                                   unsigned jobs = 0) {
  if (draws < 2) throw Error(ErrorKind::kInvalidSpec, "need at least two Monte Carlo draws");
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (draws + kChunk - 1) / kChunk;
  std::vector<detail::WelfordBlock> blocks(chunks);
  auto work = [&](std::size_t c) {
    detail::WelfordBlock b;
    b.mean.assign(k, 0.0);
    b.m2.assign(k, 0.0);
    std::vector<double> x(k);
    const std::size_t end = std::min(draws, (c + 1) * kChunk);
    for (std::size_t m = c * kChunk; m < end; ++m) {
      draw(m, x);
      b.n += 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double delta = x[j] - b.mean[j];
        b.mean[j] += delta / b.n;
        b.m2[j] += delta * (x[j] - b.mean[j]);
      }
    }
    blocks[c] = std::move(b);
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, chunks));
  if (jobs <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        for (std::size_t c = j; c < chunks; c += jobs) work(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  const detail::WelfordBlock total = detail::merge_range(blocks);
  Moments out;
  out.count = draws;
  out.mean = total.mean;
  out.stderr_.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double var = total.m2[j] / (total.n - 1.0);
    out.stderr_[j] = std::sqrt(var / total.n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Participation scenarios and verifier reports

/// A population whose participation is sampled at iteration `probe`. Each
/// draw m replays the process from t = 0 under seed derive_seed(seed, m).
struct ParticipationScenario {
  std::vector<ArrivalModel> models;
  Policy policy = Policy::kBestEffort;
  Iteration horizon = 1;
  Iteration probe = 0;
  std::vector<double> p;
  std::uint64_t seed = 0;
};

/// Decisions of every user at the probe iteration for replay m.
inline std::vector<ParticipationDecision> sample_participation(const ParticipationScenario& sc,
                                                               std::uint64_t m) {
  ParticipationProcess process(sc.models, sc.policy, sc.horizon, derive_seed(sc.seed, m));
  for (Iteration t = 0; t < sc.probe; ++t) process.step();
  return process.step();
}

/// Analytic scale making user i unbiased at the probe: T_i^t for a
/// deterministic schedule, otherwise the best-effort weight.
inline double analytic_scale(const ParticipationScenario& sc, std::size_t i) {
  if (is_deterministic(sc.models[i])) {
    const EnergyTrace trace = realize_trace(sc.models[i], sc.horizon, sc.seed, static_cast<std::uint32_t>(i));
    const InterArrival inter = inter_arrival(trace, sc.probe);
    if (!inter.gap) throw Error(ErrorKind::kMissingGap, "probe precedes the first arrival");
    return static_cast<double>(*inter.gap);
  }
  return best_effort_weight(sc.models[i]);
}

struct VerifierReport {
  std::string test;
  std::vector<double> estimate;
  std::vector<double> target;
  std::vector<double> stderr_;
  bool pass = false;
  bool negative_control = false;  // suite succeeds only if this test fails
  std::size_t draws = 0;

  /// True when the outcome is the one the suite wants.
  bool ok() const { return negative_control ? !pass : pass; }
};

/// |estimate - target| <= 3 stderr on every component. A zero standard error
/// demands agreement to rounding.
inline bool within_band(std::span<const double> estimate, std::span<const double> target,
                        std::span<const double> se) {
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const double slack = std::max(kStandardErrors * se[k], 1e-12 * (1.0 + std::abs(target[k])));
    if (!(std::abs(estimate[k] - target[k]) <= slack)) return false;
  }
  return true;
}

namespace detail {

inline void check_frozen(const ParticipationScenario& sc, const std::vector<ModelVector>& g) {
  if (g.size() != sc.models.size() || sc.p.size() != sc.models.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "scenario needs one weight and one gradient per user");
  }
  for (const auto& gi : g) require_same_dim(gi.size(), g.front().size(), "frozen gradient");
}

}  // namespace detail

/// Componentwise mean of sum_{i in S} p_i gamma_i g_i against sum_i p_i g_i.
inline VerifierReport unbiasedness_test(const ParticipationScenario& sc,
                                        const std::vector<ModelVector>& g, std::size_t draws,
                                        unsigned jobs = 0) {
  detail::check_frozen(sc, g);
  const std::size_t d = g.front().size();
  const Moments mom = monte_carlo_moments(
      draws, d,
      [&](std::uint64_t m, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const auto decisions = sample_participation(sc, m);
        for (std::size_t i = 0; i < decisions.size(); ++i) {
          if (decisions[i].participates) axpy(sc.p[i] * decisions[i].weight, g[i], out);
        }
      },
      jobs);
  VerifierReport r;
  r.test = std::string("unbiasedness/") + std::string(policy_name(sc.policy));
  r.estimate = mom.mean;
  r.stderr_ = mom.stderr_;
  r.target.assign(d, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) axpy(sc.p[i], g[i], r.target);
  r.pass = within_band(r.estimate, r.target, r.stderr_);
  r.draws = draws;
  return r;
}

/// Monte Carlo estimate of E||sum_{i in S} p_i gamma_i g_i - sum_i p_i g_i||^2.
inline Moments scaled_deviation_moments(const ParticipationScenario& sc,
                                        const std::vector<ModelVector>& g, std::size_t draws,
                                        unsigned jobs = 0) {
  detail::check_frozen(sc, g);
  const std::size_t d = g.front().size();
  ModelVector target(d, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) axpy(sc.p[i], g[i], target);
  return monte_carlo_moments(
      draws, 1,
      [&](std::uint64_t m, std::span<double> out) {
        ModelVector dev(d, 0.0);
        axpy(-1.0, target, dev);
        const auto decisions = sample_participation(sc, m);
        for (std::size_t i = 0; i < decisions.size(); ++i) {
          if (decisions[i].participates) axpy(sc.p[i] * decisions[i].weight, g[i], dev);
        }
        out[0] = squared_norm(dev);
      },
      jobs);
}

/// sum_i p_i^2 (gamma_i - 1) ||g_i||^2: the exact deviation second moment
/// for independent users with P[alpha_i = 1] = 1/gamma_i.
inline double exact_scaled_variance(const ParticipationScenario& sc, const std::vector<ModelVector>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s += sc.p[i] * sc.p[i] * (analytic_scale(sc, i) - 1.0) * squared_norm(g[i]);
  }
  return s;
}

/// Passes iff the estimate is <= sum_i p_i^2 (T_i,max - 1) G^2 + 3 stderr.
inline VerifierReport variance_term_check(const ParticipationScenario& sc,
                                          const std::vector<ModelVector>& g,
                                          std::span<const double> t_max, double G,
                                          std::size_t draws, unsigned jobs = 0) {
  require_same_dim(t_max.size(), g.size(), "variance_term_check T_max");
  for (const auto& gi : g) {
    if (squared_norm(gi) > G * G * (1.0 + 1e-12)) {
      throw Error(ErrorKind::kInvalidSpec, "frozen gradient exceeds the G bound");
    }
  }
  const Moments mom = scaled_deviation_moments(sc, g, draws, jobs);
  double bound = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) bound += sc.p[i] * sc.p[i] * (t_max[i] - 1.0) * G * G;
  VerifierReport r;
  r.test = std::string("variance_bound/") + std::string(policy_name(sc.policy));
  r.estimate = mom.mean;
  r.stderr_ = mom.stderr_;
  r.target = {bound};
  r.pass = mom.mean[0] <= bound + kStandardErrors * mom.stderr_[0] + 1e-12;
  r.draws = draws;
  return r;
}

/// Two-sided check of the deviation second moment against its closed form.
inline VerifierReport variance_exact_check(const ParticipationScenario& sc,
                                           const std::vector<ModelVector>& g, std::size_t draws,
                                           unsigned jobs = 0) {
  const Moments mom = scaled_deviation_moments(sc, g, draws, jobs);
  VerifierReport r;
  r.test = std::string("variance_exact/") + std::string(policy_name(sc.policy));
  r.estimate = mom.mean;
  r.stderr_ = mom.stderr_;
  r.target = {exact_scaled_variance(sc, g)};
  r.pass = within_band(r.estimate, r.target, r.stderr_);
  r.draws = draws;
  return r;
}

/// Empirical P[alpha_user^t = 1] for every t in [first, last) over `draws`
/// replays, against 1/T for an alg1 interval of length T = last - first
/// (the interval must start at an arrival and end at the next one).
inline VerifierReport slot_frequency_test(const ParticipationScenario& sc, std::size_t user,
                                          Iteration first, Iteration last, std::size_t draws,
                                          unsigned jobs = 0) {
  if (!(first < last) || last > sc.horizon) throw Error(ErrorKind::kInvalidSpec, "bad slot window");
  const auto width = static_cast<std::size_t>(last - first);
  const Moments mom = monte_carlo_moments(
      draws, width,
      [&](std::uint64_t m, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        ParticipationProcess process(sc.models, sc.policy, sc.horizon, derive_seed(sc.seed, m));
        for (Iteration t = 0; t < last; ++t) {
          const auto& d = process.step();
          if (t >= first && d[user].participates) out[static_cast<std::size_t>(t - first)] = 1.0;
        }
      },
      jobs);
  VerifierReport r;
  r.test = "participation_probability/" + std::string(policy_name(sc.policy));
  r.estimate = mom.mean;
  const double q = 1.0 / static_cast<double>(width);
  r.target.assign(width, q);
  // Binomial standard error at the hypothesised rate.
  r.stderr_.assign(width, std::sqrt(q * (1.0 - q) / static_cast<double>(draws)));
  r.pass = within_band(r.estimate, r.target, r.stderr_);
  r.draws = draws;
  return r;
}

}  // namespace ehsgd

#endif  // EHSGD_ANALYSIS_HPP_
