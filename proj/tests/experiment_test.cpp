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

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ehsgd/ehsgd.hpp"

using namespace ehsgd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ehsgd_experiment_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_config() {
  return parse_config_text(R"({
    "N": 4, "horizon": 60, "policy": "alg1", "seed": 5,
    "arrival_groups": [{"kind": "periodic", "period": 1}, {"kind": "periodic", "period": 3}],
    "objective": {"kind": "logistic", "dim": 3, "points_per_user": 6},
    "eta": 0.1, "metric_every": 7
  })");
}

}  // namespace

TEST_CASE("format_double round-trips", "[experiment][property]") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(0.0) == "0");
  for (std::uint64_t m = 0; m < 10'000; ++m) {
    CounterStream s(1, 0, Purpose::kConstants, m);
    const std::uint64_t bits = s.next_u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    const std::string text = format_double(v);
    double back = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), back);
    REQUIRE(std::memcmp(&back, &v, sizeof v) == 0);
  }
}

TEST_CASE("run_experiment writes metrics, summary and manifest", "[experiment]") {
  const fs::path dir = scratch("single");
  const RunConfig cfg = small_config();
  const ExperimentOutput out = run_experiment(cfg, dir);
  REQUIRE(fs::exists(dir / "metrics.csv"));
  REQUIRE(fs::exists(dir / "summary.json"));
  REQUIRE(fs::exists(dir / "manifest.json"));

  std::istringstream csv(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == kMetricsHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == out.trace.rows.size());
  CHECK(rows == 1 + 8 + 1);  // t = 0, every 7th, and t = 60

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["version"] == std::string(kVersion));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["constants"]["mu"] == 0.1);
  CHECK(manifest["constants"]["bound"].is_number());
  CHECK(manifest.contains("created_utc"));

  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["gradient_evaluations"] == out.trace.gradient_evaluations);
  CHECK(summary["final_iteration"] == 60);
  fs::remove_all(dir);
}

TEST_CASE("rerunning a manifest reproduces metrics.csv byte for byte", "[experiment]") {
  const fs::path a = scratch("first");
  const fs::path b = scratch("again");
  RunConfig cfg = small_config();
  cfg.policy = Policy::kNaiveUnscaled;
  cfg.arrivals = {Bernoulli{0.4}, UniformWindow{3}, Bernoulli{0.9}, periodic_schedule(2, 60)};
  run_experiment(cfg, a);
  run_experiment(parse_config(a / "manifest.json"), b);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(json::parse(slurp(a / "manifest.json"))["config"] == json::parse(slurp(b / "manifest.json"))["config"]);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("benchmarks carry no bound in the manifest", "[experiment]") {
  const fs::path dir = scratch("naive");
  RunConfig cfg = small_config();
  cfg.policy = Policy::kWaitForAll;
  const ExperimentOutput out = run_experiment(cfg, dir);
  CHECK_FALSE(out.derived.bound.has_value());
  CHECK_FALSE(out.derived.bound_note.empty());
  CHECK(json::parse(slurp(dir / "manifest.json"))["constants"]["bound"].is_null());
  fs::remove_all(dir);
}

TEST_CASE("batch runs fan out over seeds", "[experiment]") {
  const fs::path dir = scratch("batch");
  RunConfig cfg = small_config();
  cfg.policy = Policy::kBestEffort;
  cfg.arrivals = {Bernoulli{0.5}, Bernoulli{0.25}, UniformWindow{4}, UniformWindow{2}};
  const BatchOutput serial = run_batch(cfg, dir, {1, 3}, 1);
  for (int s = 1; s <= 3; ++s) {
    REQUIRE(fs::exists(dir / ("seed_" + std::to_string(s)) / "metrics.csv"));
  }
  REQUIRE(fs::exists(dir / "aggregate.csv"));
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["runs"] == 3);

  double mean = 0.0;
  for (const auto& tr : serial.traces) mean += tr.rows.back().global_loss / 3.0;
  CHECK_THAT(summary["final_loss_mean"].get<double>(), Catch::Matchers::WithinRel(mean, 1e-12));

  // Seed k of the batch matches a standalone run with seed k.
  RunConfig single = cfg;
  single.seed = 2;
  single.objective.data_seed = cfg.data_seed();
  const fs::path one = scratch("batch_single");
  run_experiment(single, one);
  CHECK(slurp(one / "metrics.csv") == slurp(dir / "seed_2" / "metrics.csv"));

  const std::string aggregate = slurp(dir / "aggregate.csv");
  fs::remove_all(dir);
  run_batch(cfg, dir, {1, 3}, 3);
  CHECK(slurp(dir / "aggregate.csv") == aggregate);
  fs::remove_all(dir);
  fs::remove_all(one);
}

TEST_CASE("seed ranges", "[experiment]") {
  CHECK(parse_seed_range("1..200")->last == 200);
  CHECK(parse_seed_range("7")->first == 7);
  CHECK_FALSE(parse_seed_range("5..2").has_value());
  CHECK_FALSE(parse_seed_range("a..b").has_value());
  CHECK_FALSE(parse_seed_range("").has_value());
  CHECK_FALSE(parse_seed_range("-1").has_value());
}

TEST_CASE("seed override from the environment", "[experiment]") {
  RunConfig cfg = small_config();
  apply_seed_override(cfg, "123");
  CHECK(cfg.seed == 123);
  apply_seed_override(cfg, nullptr);
  CHECK(cfg.seed == 123);
  CHECK_THROWS_AS(apply_seed_override(cfg, "1..3"), ValidationError);
}

TEST_CASE("four-group preset", "[experiment]") {
  const auto runs = preset("four-group");
  REQUIRE(runs.size() == 4);
  CHECK(runs[0].first == "alg1");
  for (const auto& [name, cfg] : runs) {
    CHECK(cfg.num_users == 40);
    CHECK(cfg.num_groups == 4);
    CHECK_NOTHROW(validate(cfg));
    if (cfg.policy == Policy::kFullParticipation) continue;
    const Iteration periods[] = {1, 5, 10, 20};
    for (std::size_t i = 0; i < 40; ++i) {
      REQUIRE(std::get<DeterministicSchedule>(cfg.arrivals[i]).times == periodic_schedule(periods[i % 4], 2000).times);
    }
  }
  CHECK(preset("nope").empty());
  CHECK_NOTHROW(validate(preset("bound-check").front().second));
}

TEST_CASE("verifier suites by name", "[experiment]") {
  CHECK_FALSE(run_suite("nope", {}).has_value());
  VerifierOptions opt;
  opt.draws = 4000;
  opt.participation_draws = 4000;
  const auto reports = run_suite("participation", opt);
  REQUIRE(reports.has_value());
  REQUIRE_FALSE(reports->empty());
  const json j = to_json(reports->front());
  CHECK(j.contains("test"));
  CHECK(j.contains("estimate"));
  CHECK(j.contains("target"));
  CHECK(j.contains("stderr"));
  CHECK(j.contains("pass"));
}
