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

#include "ehsgd/analysis.hpp"

using namespace ehsgd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> random_simplex(std::uint64_t seed, std::size_t n) {
  CounterStream s(seed, 0, Purpose::kConstants, 0);
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) total += (v = s.uniform01() + 1e-3);
  for (auto& v : p) v /= total;
  return p;
}

BoundInputs unit_inputs(Iteration T) {
  BoundInputs in;
  in.mu = 1.0;
  in.L = 1.0;
  in.eta = 0.5;
  in.T = T;
  in.initial_gap = 1.0;
  in.p = {1.0};
  in.t_max = {1.0};
  in.G = 1.0;
  return in;
}

ParticipationScenario scenario(std::vector<ArrivalModel> models, Policy policy, Iteration horizon,
                               Iteration probe, std::vector<double> p) {
  return ParticipationScenario{std::move(models), policy, horizon, probe, std::move(p), 31};
}

}  // namespace

TEST_CASE("C worked examples", "[analysis]") {
  const std::vector<double> p{0.5, 0.5};
  CHECK_THAT(compute_C(p, std::vector<double>{1, 1}, 1.0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(compute_C(p, std::vector<double>{3, 5}, 2.0), WithinAbs(10.0, 1e-14));
}

TEST_CASE("C reduces to G^2 when every user always participates", "[analysis][property]") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + seed % 12;
    const auto p = random_simplex(seed, n);
    const double G = 0.5 + seed % 7;
    REQUIRE_THAT(double_sum_term(p, G), WithinRel(G * G, 1e-12));
    REQUIRE_THAT(compute_C(p, std::vector<double>(n, 1.0), G), WithinRel(G * G, 1e-12));
  }
}

TEST_CASE("C rejects weights off the simplex", "[analysis]") {
  try {
    compute_C(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 1}, 1.0);
    FAIL("expected InvalidWeights");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidWeights);
  }
  CHECK_THROWS_AS(compute_C(std::vector<double>{1.2, -0.2}, std::vector<double>{1, 1}, 1.0), Error);
}

TEST_CASE("bound worked examples", "[analysis]") {
  CHECK_THAT(convergence_bound(unit_inputs(2000)), WithinAbs(0.25, 1e-12));
  const BoundTerms at0 = bound_terms(unit_inputs(0));
  CHECK_THAT(at0.total, WithinAbs((1.0 - 0.25) + 0.25, 1e-15));
  CHECK(at0.C == 1.0);
  CHECK(at0.floor == 0.25);
}

TEST_CASE("bound geometric term obeys its recursion", "[analysis][property]") {
  BoundInputs in = unit_inputs(0);
  in.eta = 0.1;
  in.mu = 0.5;
  in.L = 2.0;
  in.initial_gap = 5.0;
  in.p = {0.3, 0.7};
  in.t_max = {4, 2};
  in.G = 1.5;
  double prev_geom = bound_terms(in).geometric;
  double prev_total = bound_terms(in).total;
  for (Iteration T = 1; T <= 300; ++T) {
    in.T = T;
    const BoundTerms b = bound_terms(in);
    REQUIRE_THAT(b.geometric, WithinRel((1.0 - in.eta * in.mu) * prev_geom, 1e-13));
    REQUIRE(b.total <= prev_total);
    prev_geom = b.geometric;
    prev_total = b.total;
  }
}

TEST_CASE("bound premise is enforced", "[analysis]") {
  BoundInputs in = unit_inputs(10);
  in.eta = 0.6;
  try {
    convergence_bound(in);
    FAIL("expected PremiseViolated");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kPremiseViolated);
  }
  in.eta = 0.5;
  in.mu = 0.1;
  in.L = 4.0;
  CHECK_THROWS_AS(convergence_bound(in), Error);
  in.eta = 0.25;
  CHECK_NOTHROW(convergence_bound(in));
}

TEST_CASE("T_max per arrival model", "[analysis]") {
  const ArrivalModel det = DeterministicSchedule{{0, 4, 6}};
  CHECK(bound_t_max(det, realize_trace(det, 20, 0, 0)) == 14.0);
  const ArrivalModel bern = Bernoulli{0.25};
  CHECK(bound_t_max(bern, realize_trace(bern, 20, 0, 0)) == 4.0);
  const ArrivalModel win = UniformWindow{5};
  CHECK(bound_t_max(win, realize_trace(win, 20, 0, 0)) == 5.0);
}

TEST_CASE("monte carlo moments do not depend on the thread count", "[analysis]") {
  auto draw = [](std::uint64_t m, std::span<double> out) {
    CounterStream s(3, 0, Purpose::kConstants, m);
    out[0] = s.normal();
    out[1] = s.uniform01();
  };
  const Moments a = monte_carlo_moments(50'000, 2, draw, 1);
  const Moments b = monte_carlo_moments(50'000, 2, draw, 4);
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);
  CHECK(std::abs(a.mean[1] - 0.5) <= 3 * a.stderr_[1]);
  CHECK_THAT(a.stderr_[1], WithinRel(std::sqrt(1.0 / 12 / 50'000), 0.02));
}

TEST_CASE("unbiasedness worked examples", "[analysis][statistical]") {
  SECTION("single bernoulli user") {
    const auto sc = scenario({Bernoulli{0.5}}, Policy::kBestEffort, 1, 0, {1.0});
    const VerifierReport r = unbiasedness_test(sc, {{1.0}}, 40'000, 1);
    CHECK(r.pass);
    CHECK(r.target == std::vector<double>{1.0});
    CHECK(std::abs(r.estimate[0] - 1.0) <= 3 * r.stderr_[0]);
  }
  SECTION("alg1 interval of six") {
    const auto sc = scenario({DeterministicSchedule{{0, 6}}}, Policy::kDeterministicUniformSlot, 12, 2, {1.0});
    const VerifierReport r = unbiasedness_test(sc, {{0.7, -1.3}}, 40'000, 1);
    CHECK(r.pass);
    CHECK(r.target == std::vector<double>{0.7, -1.3});
  }
  SECTION("naive negative control fails") {
    const auto sc = scenario({Bernoulli{1.0}, Bernoulli{0.2}}, Policy::kNaiveUnscaled, 1, 0, {0.5, 0.5});
    const VerifierReport r = unbiasedness_test(sc, {{1.0}, {1.0}}, 40'000, 1);
    CHECK_FALSE(r.pass);
    CHECK(std::abs(r.estimate[0] - 0.6) <= 3 * r.stderr_[0]);
  }
}

TEST_CASE("variance term worked examples", "[analysis][statistical]") {
  SECTION("always participating users have no deviation") {
    const auto sc = scenario({Bernoulli{1.0}, Bernoulli{1.0}}, Policy::kBestEffort, 3, 1, {0.4, 0.6});
    const std::vector<double> tmax{1, 1};
    const VerifierReport r = variance_term_check(sc, {{1.0}, {-1.0}}, tmax, 1.0, 1000, 1);
    CHECK(r.estimate[0] == 0.0);
    CHECK(r.target[0] == 0.0);
    CHECK(r.pass);
  }
  SECTION("one user, interval of four") {
    const auto sc = scenario({DeterministicSchedule{{0, 4}}}, Policy::kDeterministicUniformSlot, 8, 1, {1.0});
    const VerifierReport r = variance_exact_check(sc, {{0.6, 0.8}}, 60'000, 1);
    CHECK(r.target[0] == 3.0);
    CHECK(r.pass);
  }
  SECTION("mixed bernoulli") {
    const auto sc = scenario({Bernoulli{0.5}, Bernoulli{0.25}}, Policy::kBestEffort, 2, 1, {0.5, 0.5});
    const std::vector<ModelVector> g{{1.0, 0.0}, {0.0, -1.0}};
    const VerifierReport exact = variance_exact_check(sc, g, 60'000, 1);
    CHECK_THAT(exact.target[0], WithinAbs(0.25 * 1 + 0.25 * 3, 1e-15));
    CHECK(exact.pass);
    const std::vector<double> tmax{2, 4};
    const VerifierReport bound = variance_term_check(sc, g, tmax, 1.0, 60'000, 1);
    CHECK(bound.pass);
  }
  SECTION("gradients above G are rejected") {
    const auto sc = scenario({Bernoulli{0.5}}, Policy::kBestEffort, 1, 0, {1.0});
    const std::vector<double> tmax{2};
    CHECK_THROWS_AS(variance_term_check(sc, {{2.0}}, tmax, 1.0, 100, 1), Error);
  }
}

TEST_CASE("alg1 slot frequencies are uniform over the interval", "[analysis][statistical]") {
  const auto sc = scenario({DeterministicSchedule{{0, 6}}}, Policy::kDeterministicUniformSlot, 12, 0, {1.0});
  const VerifierReport r = slot_frequency_test(sc, 0, 0, 6, 60'000, 1);
  CHECK(r.pass);
  CHECK(r.estimate.size() == 6);
  double total = 0.0;
  for (double x : r.estimate) total += x;
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
}

TEST_CASE("negative-control reports invert ok()", "[analysis]") {
  VerifierReport r;
  r.pass = false;
  r.negative_control = true;
  CHECK(r.ok());
  r.pass = true;
  CHECK_FALSE(r.ok());
}
