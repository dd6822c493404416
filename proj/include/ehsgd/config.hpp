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

// JSON run-config parsing and serialization.
//
// {
//   "N": 40, "horizon": 2000, "policy": "alg1", "seed": 7,
//   "arrival": {...} | "arrivals": [{...}, ...] | "arrival_groups": [{...}, ...],
//   "groups": 4,
//   "objective": {"kind": "logistic", "lambda": 0.1, "dim": 20,
//                 "points_per_user": 50, "partition": "group_label_skew",
//                 "skew": 0.9, "separation": 1.0, "data_seed": 11},
//   "eta": 0.01 | "learning_rate": {"kind": "decay", "eta0": 1.0, "kappa": 1.0},
//   "metric_every": 1, "check_bound": false, "w0": [...], "constants_radius": 5.0
// }
//
// Arrival records: {"kind":"deterministic","times":[...]},
// {"kind":"periodic","period":5,"offset":0}, {"kind":"bernoulli","beta":0.25},
// {"kind":"uniform_window","period":5}. "arrival_groups" gives user i the
// entry i mod K and defaults "groups" to K.

#ifndef EHSGD_CONFIG_HPP_
#define EHSGD_CONFIG_HPP_

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ehsgd/energy_arrivals.hpp"
#include "ehsgd/error.hpp"
#include "ehsgd/scheduling.hpp"
#include "ehsgd/training.hpp"

namespace ehsgd {

using json = nlohmann::json;

namespace detail {

inline const json& require_field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(path + key, "missing");
  return obj.at(key);
}

inline double get_number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require_field(obj, key, path);
  if (!v.is_number()) throw ValidationError(path + key, "expected a number");
  return v.get<double>();
}

inline std::int64_t get_integer(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require_field(obj, key, path);
  if (!v.is_number_integer()) throw ValidationError(path + key, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require_field(obj, key, path);
  if (!v.is_string()) throw ValidationError(path + key, "expected a string");
  return v.get<std::string>();
}

template <typename T, typename Getter>
T get_or(const json& obj, const std::string& key, T fallback, Getter getter) {
  return obj.contains(key) ? static_cast<T>(getter()) : fallback;
}

// `field` is the path to the record itself, e.g. "arrival" or "arrivals[2]".
inline ArrivalModel parse_arrival(const json& j, const std::string& field, Iteration horizon) {
  if (!j.is_object()) throw ValidationError(field, "expected an object");
  const std::string p = field + ".";
  const std::string kind = get_string(j, "kind", p);
  ArrivalModel model;
  if (kind == "deterministic") {
    const json& times = require_field(j, "times", p);
    if (!times.is_array()) throw ValidationError(p + "times", "expected an array");
    DeterministicSchedule s;
    for (const auto& t : times) {
      if (!t.is_number_integer()) throw ValidationError(p + "times", "expected integers");
      s.times.push_back(t.get<Iteration>());
    }
    model = s;
  } else if (kind == "periodic") {
    const Iteration period = get_integer(j, "period", p);
    const Iteration offset = j.contains("offset") ? get_integer(j, "offset", p) : 0;
    if (period < 1) throw ValidationError(p + "period", "must be >= 1");
    if (offset < 0) throw ValidationError(p + "offset", "must be >= 0");
    model = periodic_schedule(period, horizon, offset);
  } else if (kind == "bernoulli") {
    const double beta = get_number(j, "beta", p);
    if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError(p + "beta", "must lie in (0, 1]");
    model = Bernoulli{beta};
  } else if (kind == "uniform_window") {
    const Iteration period = get_integer(j, "period", p);
    if (period < 1) throw ValidationError(p + "period", "must be >= 1");
    model = UniformWindow{period};
  } else {
    throw ValidationError(p + "kind", "unknown arrival kind '" + kind + "'");
  }
  try {
    validate(model, horizon);
  } catch (const Error& e) {
    throw ValidationError(field, e.what());
  }
  return model;
}

inline ObjectiveConfig parse_objective(const json& j, std::size_t n, std::size_t groups) {
  if (!j.is_object()) throw ValidationError("objective", "expected an object");
  const std::string p = "objective.";
  ObjectiveConfig oc;
  SyntheticSpec& s = oc.synthetic;
  s.num_users = n;
  const std::string kind = get_string(j, "kind", p);
  if (kind == "quadratic") {
    s.loss = QuadraticLoss{};
  } else if (kind == "logistic") {
    const double lambda = j.contains("lambda") ? get_number(j, "lambda", p) : 0.1;
    if (!(lambda > 0.0)) throw ValidationError(p + "lambda", "must be > 0");
    s.loss = RegularizedLogisticLoss{lambda};
  } else {
    throw ValidationError(p + "kind", "unknown objective kind '" + kind + "'");
  }
  const std::int64_t default_dim = kind == "logistic" ? 2 : 1;
  const std::int64_t dim = j.contains("dim") ? get_integer(j, "dim", p) : default_dim;
  if (dim < default_dim) throw ValidationError(p + "dim", "must be >= " + std::to_string(default_dim));
  s.dim = static_cast<std::size_t>(dim);
  const std::int64_t ppu = j.contains("points_per_user") ? get_integer(j, "points_per_user", p) : 1;
  if (ppu < 1) throw ValidationError(p + "points_per_user", "must be >= 1");
  s.points_per_user = static_cast<std::size_t>(ppu);
  const std::string partition = j.contains("partition") ? get_string(j, "partition", p) : "iid";
  if (partition == "iid") {
    s.mode = PartitionMode::kIid;
  } else if (partition == "group_label_skew") {
    s.mode = PartitionMode::kGroupLabelSkew;
  } else {
    throw ValidationError(p + "partition", "expected 'iid' or 'group_label_skew'");
  }
  const std::int64_t g = j.contains("groups") ? get_integer(j, "groups", p) : static_cast<std::int64_t>(groups);
  if (g < 1) throw ValidationError(p + "groups", "must be >= 1");
  s.num_groups = static_cast<std::size_t>(g);
  if (j.contains("skew")) {
    s.skew = get_number(j, "skew", p);
    if (!(s.skew >= 0.5 && s.skew <= 1.0)) throw ValidationError(p + "skew", "must lie in [0.5, 1]");
  }
  if (j.contains("separation")) s.separation = get_number(j, "separation", p);
  if (j.contains("data_seed")) {
    const json& ds = j.at("data_seed");
    if (!ds.is_number_unsigned()) throw ValidationError(p + "data_seed", "expected a non-negative integer");
    oc.data_seed = ds.get<std::uint64_t>();
  }
  return oc;
}

}  // namespace detail

/// Parses and validates a config document. Type and invariant failures raise
/// ValidationError with the offending field path.
inline RunConfig parse_config_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ValidationError("<root>", "expected a JSON object");
  RunConfig cfg;
  const std::int64_t n = get_integer(j, "N", "");
  if (n < 1) throw ValidationError("N", "must be >= 1");
  cfg.num_users = static_cast<std::size_t>(n);
  cfg.horizon = get_integer(j, "horizon", "");
  if (cfg.horizon < 1) throw ValidationError("horizon", "must be >= 1");

  const std::string policy = get_string(j, "policy", "");
  const auto parsed = parse_policy(policy);
  if (!parsed) throw ValidationError("policy", "unknown policy '" + policy + "'");
  cfg.policy = *parsed;

  const json& seed = require_field(j, "seed", "");
  if (!seed.is_number_unsigned()) throw ValidationError("seed", "expected a non-negative integer");
  cfg.seed = seed.get<std::uint64_t>();

  std::size_t arrival_groups = 0;
  const int arrival_keys = int{j.contains("arrival")} + int{j.contains("arrivals")} + int{j.contains("arrival_groups")};
  if (arrival_keys > 1) throw ValidationError("arrival", "give only one of arrival, arrivals, arrival_groups");
  if (j.contains("arrival")) {
    cfg.arrivals.assign(cfg.num_users, parse_arrival(j.at("arrival"), "arrival", cfg.horizon));
  } else if (j.contains("arrivals")) {
    const json& list = j.at("arrivals");
    if (!list.is_array() || list.size() != cfg.num_users) {
      throw ValidationError("arrivals", "expected an array with N entries");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.arrivals.push_back(parse_arrival(list[i], "arrivals[" + std::to_string(i) + "]", cfg.horizon));
    }
  } else if (j.contains("arrival_groups")) {
    const json& list = j.at("arrival_groups");
    if (!list.is_array() || list.empty()) throw ValidationError("arrival_groups", "expected a non-empty array");
    std::vector<ArrivalModel> per_group;
    for (std::size_t k = 0; k < list.size(); ++k) {
      per_group.push_back(parse_arrival(list[k], "arrival_groups[" + std::to_string(k) + "]", cfg.horizon));
    }
    for (std::size_t i = 0; i < cfg.num_users; ++i) cfg.arrivals.push_back(per_group[i % per_group.size()]);
    arrival_groups = per_group.size();
  } else if (cfg.policy != Policy::kFullParticipation) {
    throw ValidationError("arrival", "required unless policy is 'full'");
  }

  const std::int64_t groups = j.contains("groups") ? get_integer(j, "groups", "")
                                                   : static_cast<std::int64_t>(std::max<std::size_t>(arrival_groups, 1));
  if (groups < 1) throw ValidationError("groups", "must be >= 1");
  cfg.num_groups = static_cast<std::size_t>(groups);

  cfg.objective = parse_objective(require_field(j, "objective", ""), cfg.num_users, cfg.num_groups);

  if (j.contains("eta") && j.contains("learning_rate")) {
    throw ValidationError("eta", "give either eta or learning_rate");
  }
  if (!j.contains("eta") && !j.contains("learning_rate")) {
    throw ValidationError("eta", "missing (or give a learning_rate object)");
  }
  if (j.contains("eta")) {
    cfg.learning_rate = {LearningRateSchedule::Kind::kConstant, get_number(j, "eta", ""), 0.0};
  } else {
    const json& lr = require_field(j, "learning_rate", "");
    const std::string kind = get_string(lr, "kind", "learning_rate.");
    cfg.learning_rate.eta0 = get_number(lr, "eta0", "learning_rate.");
    if (kind == "constant") {
      cfg.learning_rate.kind = LearningRateSchedule::Kind::kConstant;
    } else if (kind == "decay") {
      cfg.learning_rate.kind = LearningRateSchedule::Kind::kDecay;
      cfg.learning_rate.kappa = get_number(lr, "kappa", "learning_rate.");
    } else {
      throw ValidationError("learning_rate.kind", "expected 'constant' or 'decay'");
    }
  }
  if (!(cfg.learning_rate.eta0 > 0.0)) {
    throw ValidationError(j.contains("eta") ? "eta" : "learning_rate.eta0", "must be > 0");
  }

  if (j.contains("metric_every")) cfg.metric_every = get_integer(j, "metric_every", "");
  if (j.contains("check_bound")) {
    if (!j.at("check_bound").is_boolean()) throw ValidationError("check_bound", "expected a boolean");
    cfg.check_bound = j.at("check_bound").get<bool>();
  }
  if (j.contains("w0")) {
    const json& w0 = j.at("w0");
    if (!w0.is_array()) throw ValidationError("w0", "expected an array");
    ModelVector w;
    for (const auto& v : w0) {
      if (!v.is_number()) throw ValidationError("w0", "expected numbers");
      w.push_back(v.get<double>());
    }
    cfg.initial_model = std::move(w);
  }
  if (j.contains("constants_radius")) {
    cfg.constants_radius = get_number(j, "constants_radius", "");
    if (!(cfg.constants_radius > 0.0)) throw ValidationError("constants_radius", "must be > 0");
  }

  validate(cfg);
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParseError, e.what());
  }
  // A run manifest embeds its resolved config under "config".
  if (j.is_object() && j.contains("config") && !j.contains("N")) return parse_config_json(j.at("config"));
  return parse_config_json(j);
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kParseError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Arrival record; deterministic schedules that are exactly periodic over the
/// horizon are written in the compact periodic form.
inline json arrival_to_json(const ArrivalModel& model, Iteration horizon) {
  if (const auto* s = std::get_if<DeterministicSchedule>(&model)) {
    if (s->times.size() >= 2) {
      const Iteration period = s->times[1] - s->times[0];
      if (periodic_schedule(period, horizon, s->times[0]).times == s->times) {
        return {{"kind", "periodic"}, {"period", period}, {"offset", s->times[0]}};
      }
    }
    return {{"kind", "deterministic"}, {"times", s->times}};
  }
  if (const auto* b = std::get_if<Bernoulli>(&model)) return {{"kind", "bernoulli"}, {"beta", b->beta}};
  return {{"kind", "uniform_window"}, {"period", std::get<UniformWindow>(model).period}};
}

/// Fully resolved config; parse_config_json(to_json(cfg)) reproduces cfg.
inline json to_json(const RunConfig& cfg) {
  json j;
  j["N"] = cfg.num_users;
  j["horizon"] = cfg.horizon;
  j["policy"] = std::string(policy_name(cfg.policy));
  j["seed"] = cfg.seed;
  j["groups"] = cfg.num_groups;
  if (!cfg.arrivals.empty()) {
    json list = json::array();
    for (const auto& a : cfg.arrivals) list.push_back(arrival_to_json(a, cfg.horizon));
    j["arrivals"] = std::move(list);
  }
  const SyntheticSpec& s = cfg.objective.synthetic;
  json obj;
  if (const auto* lg = std::get_if<RegularizedLogisticLoss>(&s.loss)) {
    obj["kind"] = "logistic";
    obj["lambda"] = lg->lambda;
  } else {
    obj["kind"] = "quadratic";
  }
  obj["dim"] = s.dim;
  obj["points_per_user"] = s.points_per_user;
  obj["partition"] = s.mode == PartitionMode::kIid ? "iid" : "group_label_skew";
  obj["groups"] = s.num_groups;
  obj["skew"] = s.skew;
  obj["separation"] = s.separation;
  obj["data_seed"] = cfg.data_seed();
  j["objective"] = std::move(obj);
  if (cfg.learning_rate.kind == LearningRateSchedule::Kind::kConstant) {
    j["learning_rate"] = {{"kind", "constant"}, {"eta0", cfg.learning_rate.eta0}};
  } else {
    j["learning_rate"] = {{"kind", "decay"}, {"eta0", cfg.learning_rate.eta0}, {"kappa", cfg.learning_rate.kappa}};
  }
  j["metric_every"] = cfg.metric_every;
  j["check_bound"] = cfg.check_bound;
  if (cfg.initial_model) j["w0"] = *cfg.initial_model;
  j["constants_radius"] = cfg.constants_radius;
  return j;
}

}  // namespace ehsgd

#endif  // EHSGD_CONFIG_HPP_
