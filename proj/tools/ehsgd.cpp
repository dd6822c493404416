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

// ehsgd: run energy-harvesting distributed SGD experiments and verifiers.
//
//   ehsgd --config run.json --output out/ [--seeds 1..200] [--policy naive] [--jobs 4]
//   ehsgd --preset four-group --output out/ [--seeds 1..20]
//   ehsgd --verify all [--output reports/]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ehsgd/ehsgd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config;
  std::string output = "ehsgd_out";
  std::string seeds;
  std::string policy;
  std::string preset;
  std::string verify;
  unsigned jobs = 1;
  std::uint64_t verify_seed = ehsgd::VerifierOptions{}.seed;
  std::size_t draws = ehsgd::VerifierOptions{}.draws;
  bool draws_given = false;
};

void run_one(const ehsgd::RunConfig& cfg, const std::filesystem::path& out,
             const std::optional<ehsgd::SeedRange>& seeds, unsigned jobs) {
  if (seeds) {
    const auto batch = ehsgd::run_batch(cfg, out, *seeds, jobs);
    std::cout << out.string() << ": " << batch.seeds.size() << " runs, final loss "
              << batch.summary["final_loss_mean"].get<double>() << " +/- "
              << batch.summary["final_loss_stderr"].get<double>() << "\n";
  } else {
    const auto res = ehsgd::run_experiment(cfg, out);
    std::cout << out.string() << ": final loss " << res.trace.rows.back().global_loss << " (gap "
              << res.trace.rows.back().loss_gap << ")\n";
  }
}

int run_verify(const Options& opt) {
  ehsgd::VerifierOptions vo;
  vo.seed = opt.verify_seed;
  vo.draws = opt.draws;
  if (opt.draws_given) vo.participation_draws = opt.draws;
  vo.jobs = opt.jobs;
  const auto reports = ehsgd::run_suite(opt.verify, vo);
  if (!reports) {
    std::cerr << "unknown verifier suite '" << opt.verify << "'; expected one of:";
    for (const auto& n : ehsgd::suite_names()) std::cerr << ' ' << n;
    std::cerr << '\n';
    return kExitUsage;
  }
  nlohmann::json all = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : *reports) {
    all.push_back(ehsgd::to_json(r));
    ok = ok && r.ok();
  }
  std::cout << all.dump(2) << '\n';
  if (!opt.output.empty()) {
    std::filesystem::create_directories(opt.output);
    std::ofstream(std::filesystem::path(opt.output) / ("verify_" + opt.verify + ".json")) << all.dump(2) << '\n';
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-harvesting distributed SGD simulator"};
  Options opt;
  app.set_version_flag("--version", std::string(ehsgd::kVersion));
  app.add_option("--config", opt.config, "Run config (JSON) or a manifest.json from an earlier run");
  app.add_option("--output", opt.output, "Output directory");
  app.add_option("--seeds", opt.seeds, "Seed range A..B (inclusive) for a multi-seed batch");
  app.add_option("--policy", opt.policy, "Override the config policy")
      ->check(CLI::IsMember({"alg1", "best_effort", "naive", "wait_for_all", "full"}));
  app.add_option("--preset", opt.preset, "Built-in experiment")->check(CLI::IsMember(ehsgd::preset_names()));
  app.add_option("--verify", opt.verify, "Verifier suite: unbiasedness, participation, variance, bound, all");
  app.add_option("--jobs", opt.jobs, "Concurrent runs / Monte Carlo threads")->check(CLI::PositiveNumber);
  app.add_option("--verify-seed", opt.verify_seed, "Master seed for verifier scenarios");
  app.add_option("--draws", opt.draws, "Monte Carlo draws per verifier test")->check(CLI::Range(2, 100'000'000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  opt.draws_given = app.count("--draws") > 0;
  const int modes = int{!opt.config.empty()} + int{!opt.preset.empty()} + int{!opt.verify.empty()};
  if (modes != 1) {
    std::cerr << "give exactly one of --config, --preset, --verify\n" << app.help();
    return kExitUsage;
  }

  try {
    if (!opt.verify.empty()) {
      if (app.count("--output") == 0) opt.output.clear();
      return run_verify(opt);
    }

    std::optional<ehsgd::SeedRange> seeds;
    if (!opt.seeds.empty()) {
      seeds = ehsgd::parse_seed_range(opt.seeds);
      if (!seeds) {
        std::cerr << "--seeds expects A..B with A <= B\n";
        return kExitUsage;
      }
    }
    const char* env_seed = std::getenv("EHSGD_SEED");
    const std::filesystem::path out(opt.output);

    if (!opt.config.empty()) {
      ehsgd::RunConfig cfg = ehsgd::parse_config(opt.config);
      ehsgd::apply_seed_override(cfg, env_seed);
      if (!opt.policy.empty()) {
        cfg.policy = *ehsgd::parse_policy(opt.policy);
        ehsgd::validate(cfg);
      }
      run_one(cfg, out, seeds, opt.jobs);
      return kExitOk;
    }

    auto runs = ehsgd::preset(opt.preset);
    nlohmann::json index = nlohmann::json::array();
    for (auto& [dir, cfg] : runs) {
      ehsgd::apply_seed_override(cfg, env_seed);
      if (!opt.policy.empty()) {
        cfg.policy = *ehsgd::parse_policy(opt.policy);
        ehsgd::validate(cfg);
      }
      run_one(cfg, out / dir, seeds, opt.jobs);
      index.push_back({{"run", dir}, {"policy", std::string(ehsgd::policy_name(cfg.policy))}});
    }
    std::ofstream(out / "preset.json") << nlohmann::json{{"preset", opt.preset}, {"runs", index}}.dump(2) << '\n';
    return kExitOk;
  } catch (const ehsgd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool usage = e.kind() == ehsgd::ErrorKind::kValidationError || e.kind() == ehsgd::ErrorKind::kParseError;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
