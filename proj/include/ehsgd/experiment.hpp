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

// Experiment orchestration: single runs, multi-seed batches and presets, and
// the files they write (metrics.csv, summary.json, manifest.json).

#ifndef EHSGD_EXPERIMENT_HPP_
#define EHSGD_EXPERIMENT_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "ehsgd/analysis.hpp"
#include "ehsgd/config.hpp"
#include "ehsgd/objective.hpp"
#include "ehsgd/training.hpp"
#include "ehsgd/verifiers.hpp"

namespace ehsgd {

inline constexpr std::string_view kVersion = "ehsgd 0.1.0";
inline constexpr std::string_view kMetricsHeader =
    "iteration,global_loss,loss_gap,num_participants,energy_spent,energy_wasted";

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_metrics_csv(const MetricsTrace& trace, std::ostream& os) {
  os << kMetricsHeader << '\n';
  for (const auto& r : trace.rows) {
    os << r.iteration << ',' << format_double(r.global_loss) << ',' << format_double(r.loss_gap) << ','
       << r.num_participants << ',' << r.energy_spent << ',' << r.energy_wasted << '\n';
  }
}

/// Constants recorded in the manifest. `bound` is present only for policies
/// the bound covers (alg1, best_effort, full) with a constant step size that
/// satisfies eta <= min{1/(2mu), 1/L}.
struct DerivedConstants {
  ProblemConstants constants;
  double radius = 1.0;
  double optimum_loss = 0.0;
  double initial_gap = 0.0;
  std::optional<double> C;
  std::optional<double> bound;
  std::string bound_note;
};

inline DerivedConstants derive_constants(const RunConfig& cfg, const Objective& obj, const Optimum& opt) {
  DerivedConstants d;
  d.radius = cfg.constants_radius;
  d.constants = estimate_constants(obj, opt.w, {cfg.constants_radius, 256, cfg.data_seed(), 1.1});
  d.optimum_loss = opt.loss;
  const ModelVector w0 = cfg.initial_model.value_or(ModelVector(obj.dim(), 0.0));
  d.initial_gap = obj.global_loss(w0) - opt.loss;

  std::vector<double> t_max;
  switch (cfg.policy) {
    case Policy::kFullParticipation:
      t_max.assign(cfg.num_users, 1.0);
      break;
    case Policy::kDeterministicUniformSlot:
    case Policy::kBestEffort:
      for (std::size_t i = 0; i < cfg.num_users; ++i) {
        const EnergyTrace trace = realize_trace(cfg.arrivals[i], cfg.horizon, cfg.seed, static_cast<std::uint32_t>(i));
        t_max.push_back(bound_t_max(cfg.arrivals[i], trace));
      }
      break;
    default:
      d.bound_note = "no bound for unscaled or synchronized benchmarks";
      return d;
  }
  d.C = compute_C(obj.weights(), t_max, d.constants.G);
  if (cfg.learning_rate.kind != LearningRateSchedule::Kind::kConstant) {
    d.bound_note = "bound requires a constant learning rate";
    return d;
  }
  BoundInputs in{d.constants.mu, d.constants.L, cfg.learning_rate.eta0, cfg.horizon,
                 d.initial_gap, obj.weights(), t_max, d.constants.G};
  try {
    d.bound = convergence_bound(in);
  } catch (const Error& e) {
    d.bound_note = e.what();
  }
  return d;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json make_manifest(const RunConfig& cfg, const DerivedConstants& d) {
  auto opt_num = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json m;
  m["version"] = std::string(kVersion);
  m["seed"] = cfg.seed;
  m["config"] = to_json(cfg);
  m["constants"] = {{"mu", d.constants.mu},
                    {"L", d.constants.L},
                    {"G", d.constants.G},
                    {"sigma", d.constants.sigma},
                    {"radius", d.radius},
                    {"C", opt_num(d.C)},
                    {"bound", opt_num(d.bound)},
                    {"optimum_loss", d.optimum_loss},
                    {"initial_gap", d.initial_gap}};
  if (!d.bound_note.empty()) m["constants"]["bound_note"] = d.bound_note;
  m["created_utc"] = utc_timestamp();
  return m;
}

inline nlohmann::json summarize(const MetricsTrace& trace) {
  const MetricsRow& last = trace.rows.back();
  return {{"final_iteration", last.iteration},
          {"final_loss", last.global_loss},
          {"final_gap", last.loss_gap},
          {"optimum_loss", trace.optimum_loss},
          {"gradient_evaluations", trace.gradient_evaluations},
          {"model_updates", trace.model_updates},
          {"energy_arrivals", trace.energy_arrivals},
          {"energy_spent", last.energy_spent},
          {"energy_wasted", last.energy_wasted},
          {"mean_participants",
           last.iteration > 0 ? static_cast<double>(trace.gradient_evaluations) / static_cast<double>(last.iteration)
                              : 0.0},
          {"group_participations", trace.group_participations},
          {"final_model", trace.final_model}};
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kInvalidSpec, "cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline void write_run(const std::filesystem::path& dir, const RunConfig& cfg, const DerivedConstants& d,
                      const MetricsTrace& trace) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw Error(ErrorKind::kInvalidSpec, "cannot write " + (dir / "metrics.csv").string());
  write_metrics_csv(trace, csv);
  write_json(dir / "summary.json", summarize(trace));
  write_json(dir / "manifest.json", make_manifest(cfg, d));
}

}  // namespace detail

struct ExperimentOutput {
  MetricsTrace trace;
  DerivedConstants derived;
};

/// One run; writes metrics.csv, summary.json and manifest.json under `out`.
inline ExperimentOutput run_experiment(const RunConfig& cfg, const std::filesystem::path& out) {
  validate(cfg);
  const Objective obj = make_synthetic(cfg.objective.synthetic, cfg.data_seed());
  const Optimum opt = solve_optimum(obj);
  ExperimentOutput res;
  res.derived = derive_constants(cfg, obj, opt);
  res.trace = run(cfg, obj, opt.loss);
  detail::write_run(out, cfg, res.derived, res.trace);
  return res;
}

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;  // inclusive
};

/// Parses "A..B" (inclusive) or a single seed "A".
inline std::optional<SeedRange> parse_seed_range(std::string_view text) {
  auto parse_u64 = [](std::string_view s) -> std::optional<std::uint64_t> {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
  };
  const auto dots = text.find("..");
  if (dots == std::string_view::npos) {
    const auto v = parse_u64(text);
    if (!v) return std::nullopt;
    return SeedRange{*v, *v};
  }
  const auto a = parse_u64(text.substr(0, dots));
  const auto b = parse_u64(text.substr(dots + 2));
  if (!a || !b || *b < *a) return std::nullopt;
  return SeedRange{*a, *b};
}

struct BatchOutput {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsTrace> traces;
  nlohmann::json summary;
};

/// One run per seed in `range`, each in out/seed_<k>/, run on up to `jobs`
/// threads. The dataset stays fixed at the base config's data seed. Writes
/// aggregate.csv (per recorded iteration mean and standard error across
/// seeds), summary.json and a root manifest.json.
inline BatchOutput run_batch(const RunConfig& base, const std::filesystem::path& out, SeedRange range,
                             unsigned jobs = 1) {
  validate(base);
  RunConfig pinned = base;
  pinned.objective.data_seed = base.data_seed();
  const Objective obj = make_synthetic(pinned.objective.synthetic, pinned.data_seed());
  const Optimum opt = solve_optimum(obj);

  BatchOutput res;
  for (std::uint64_t s = range.first;; ++s) {
    res.seeds.push_back(s);
    if (s == range.last) break;
  }
  const std::size_t n = res.seeds.size();
  res.traces.resize(n);
  std::vector<std::string> errors(n);
  auto one = [&](std::size_t k) {
    try {
      RunConfig c = pinned;
      c.seed = res.seeds[k];
      const DerivedConstants d = derive_constants(c, obj, opt);
      res.traces[k] = run(c, obj, opt.loss);
      detail::write_run(out / ("seed_" + std::to_string(c.seed)), c, d, res.traces[k]);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };
  jobs = std::max(1u, static_cast<unsigned>(std::min<std::size_t>(jobs, n)));
  {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        for (std::size_t k = j; k < n; k += jobs) one(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k].empty()) {
      throw Error(ErrorKind::kInvalidSpec, "seed " + std::to_string(res.seeds[k]) + ": " + errors[k]);
    }
  }

  const std::size_t rows = res.traces.front().rows.size();
  std::ofstream csv(out / "aggregate.csv", std::ios::binary);
  csv << "iteration,mean_loss,stderr_loss,mean_gap,stderr_gap,mean_participants\n";
  const auto count = static_cast<double>(n);
  auto mean_se = [&](std::size_t r, auto field) {
    double m = 0.0;
    for (const auto& tr : res.traces) m += field(tr.rows[r]) / count;
    double v = 0.0;
    for (const auto& tr : res.traces) v += (field(tr.rows[r]) - m) * (field(tr.rows[r]) - m);
    const double se = n > 1 ? std::sqrt(v / (count - 1.0) / count) : 0.0;
    return std::pair{m, se};
  };
  for (std::size_t r = 0; r < rows; ++r) {
    const auto [ml, sl] = mean_se(r, [](const MetricsRow& row) { return row.global_loss; });
    const auto [mg, sg] = mean_se(r, [](const MetricsRow& row) { return row.loss_gap; });
    const double mp = mean_se(r, [](const MetricsRow& row) { return static_cast<double>(row.num_participants); }).first;
    csv << res.traces.front().rows[r].iteration << ',' << format_double(ml) << ',' << format_double(sl) << ','
        << format_double(mg) << ',' << format_double(sg) << ',' << format_double(mp) << '\n';
  }
  const auto [fl, fsl] = mean_se(rows - 1, [](const MetricsRow& row) { return row.global_loss; });
  const auto [fg, fsg] = mean_se(rows - 1, [](const MetricsRow& row) { return row.loss_gap; });
  res.summary = {{"policy", std::string(policy_name(base.policy))},
                 {"seeds", {range.first, range.last}},
                 {"runs", n},
                 {"final_loss_mean", fl},
                 {"final_loss_stderr", fsl},
                 {"final_gap_mean", fg},
                 {"final_gap_stderr", fsg},
                 {"optimum_loss", opt.loss}};
  detail::write_json(out / "summary.json", res.summary);
  nlohmann::json manifest = make_manifest(pinned, derive_constants(pinned, obj, opt));
  manifest["seeds"] = {range.first, range.last};
  detail::write_json(out / "manifest.json", manifest);
  return res;
}

/// The four-group experiment: N = 40 users, user i in group i mod 4 with
/// periodic arrivals every (1, 5, 10, 20) iterations, group-label-skewed
/// logistic data (d = 20, 50 points per user, lambda = 0.1), eta = 0.01,
/// T = 2000. One config per compared policy.
inline RunConfig four_group_config(Policy policy, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.num_users = 40;
  cfg.horizon = 2000;
  cfg.policy = policy;
  cfg.num_groups = 4;
  cfg.objective.synthetic = {40, 20, 50, PartitionMode::kGroupLabelSkew, RegularizedLogisticLoss{0.1}, 4, 0.9, 1.0};
  cfg.objective.data_seed = 7;
  cfg.learning_rate = {LearningRateSchedule::Kind::kConstant, 0.01, 0.0};
  cfg.seed = seed;
  cfg.metric_every = 10;
  if (policy != Policy::kFullParticipation) {
    constexpr Iteration kPeriods[4] = {1, 5, 10, 20};
    for (std::size_t i = 0; i < cfg.num_users; ++i) {
      cfg.arrivals.push_back(periodic_schedule(kPeriods[i % 4], cfg.horizon));
    }
  }
  return cfg;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"four-group", "bound-check"};
  return names;
}

/// Named presets as (subdirectory, config) pairs; empty for an unknown name.
inline std::vector<std::pair<std::string, RunConfig>> preset(const std::string& name) {
  std::vector<std::pair<std::string, RunConfig>> out;
  if (name == "four-group") {
    for (Policy p : {Policy::kDeterministicUniformSlot, Policy::kNaiveUnscaled, Policy::kWaitForAll,
                     Policy::kFullParticipation}) {
      out.emplace_back(std::string(policy_name(p)), four_group_config(p));
    }
  } else if (name == "bound-check") {
    RunConfig cfg = default_bound_config();
    cfg.seed = 1;
    cfg.constants_radius = 10.0;
    out.emplace_back("alg1", cfg);
  }
  return out;
}

/// Applies EHSGD_SEED (a non-negative integer) to the config seed.
inline void apply_seed_override(RunConfig& cfg, const char* value) {
  if (value == nullptr || *value == '\0') return;
  const auto range = parse_seed_range(value);
  if (!range || range->first != range->last) throw ValidationError("EHSGD_SEED", "expected a single integer seed");
  cfg.seed = range->first;
}

}  // namespace ehsgd

#endif  // EHSGD_EXPERIMENT_HPP_
