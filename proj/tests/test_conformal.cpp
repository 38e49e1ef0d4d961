// Copyright 2026 The clmasp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "clmasp/conformal.hpp"
#include "clmasp/random.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clmasp;
using namespace clmasp::conformal;

namespace {

Sample random_sample(Rng& rng, double p_admissible) {
  Sample s;
  std::size_t len = 3 + rng.index(8);
  for (std::size_t i = 0; i < len; ++i) {
    s.text += "t" + std::to_string(rng.index(6)) + " ";
    s.token_logprobs.push_back(-rng.exponential(0.4));
  }
  s.raw_text = s.text;
  s.admissible = rng.bernoulli(p_admissible) ? 1 : 0;
  s.origin = s.admissible ? "clean" : "broken";
  return s;
}

AdmissionFn syntax_admission() {
  return [](const Sample& s) { return s.admissible; };
}

// Samples plus per-sample correctness, drawn once and replayable.
struct Stream {
  std::vector<Sample> samples;
  std::vector<int> correct;
};

Stream random_stream(Rng& rng, std::size_t k, double p_adm, double p_correct) {
  Stream st;
  for (std::size_t i = 0; i < k; ++i) {
    st.samples.push_back(random_sample(rng, p_adm));
    st.correct.push_back(st.samples.back().admissible && rng.bernoulli(p_correct) ? 1 : 0);
  }
  return st;
}

CalibrationRecord record_of(const Stream& st, const std::string& id) {
  std::vector<std::string> outcomes(st.samples.size(), "x");
  return make_record(id, 1, st.samples, st.correct, outcomes, metrics::rouge_bundle());
}

CalibrationSettings small_settings() {
  CalibrationSettings s;
  s.grid = LambdaGrid::uniform(4);
  return s;
}

}  // namespace

TEST_CASE("binomial p-value closed forms") {
  CHECK(binomial_tail_pvalue(10, 0.5, 0.0) == doctest::Approx(0.0009765625).epsilon(1e-14));
  for (std::size_t n : {1u, 7u, 100u}) {
    CHECK(binomial_tail_pvalue(n, 1.0, 0.0) == 0.0);
    CHECK(binomial_tail_pvalue(n, 1.0, 0.5) == 0.0);
    CHECK(binomial_tail_pvalue(n, 1.0, 1.0) == 1.0);
    CHECK(binomial_tail_pvalue(n, 0.0, 0.0) == 1.0);
  }
  CHECK_THROWS_AS(binomial_tail_pvalue(0, 0.5, 0.0), DomainError);
  CHECK_THROWS_AS(binomial_tail_pvalue(5, 1.5, 0.0), DomainError);
}

TEST_CASE("binomial p-value matches exact rational CDF for n <= 30") {
  using boost::multiprecision::cpp_bin_float_50;
  for (unsigned n = 1; n <= 30; ++n) {
    for (unsigned e = 0; e <= 100; ++e) {
      for (unsigned m = 0; m <= n; ++m) {
        double expected = static_cast<double>(
            cpp_bin_float_50(oracle::binom_cdf_exact(n, e, 100, m)));
        double got = binomial_cdf(n, e / 100.0, m);
        if (expected == 0.0) {
          REQUIRE(got == 0.0);
        } else {
          REQUIRE(std::fabs(got - expected) / expected <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("binomial p-value at n = 500 against exact rational oracle") {
  using boost::multiprecision::cpp_bin_float_50;
  double expected = static_cast<double>(cpp_bin_float_50(oracle::binom_cdf_exact(500, 1, 10, 37)));
  double got = binomial_tail_pvalue(500, 0.1, 0.074);
  CHECK(std::fabs(got - expected) / expected <= 1e-10);
  CHECK(empirical_risk(std::vector<int>(37, 1)) == 1.0);
  std::vector<int> losses(500, 0);
  for (int i = 0; i < 37; ++i) losses[i] = 1;
  CHECK(empirical_risk(losses) == doctest::Approx(0.074));
}

TEST_CASE("binomial p-value is non-increasing in epsilon") {
  for (std::size_t n : {1u, 13u, 200u, 2000u}) {
    for (std::size_t m = 0; m <= n; m += std::max<std::size_t>(1, n / 17)) {
      double prev = 2.0;
      for (int e = 0; e <= 100; ++e) {
        double p = binomial_cdf(n, e / 100.0, m);
        REQUIRE(p <= prev);
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        prev = p;
      }
    }
  }
  auto table = binomial_cdf_table(200, 0.07);
  for (std::size_t m = 0; m <= 200; ++m) CHECK(table[m] == binomial_cdf(200, 0.07, m));
}

TEST_CASE("empirical risk") {
  CHECK(empirical_risk({0, 0, 0, 0}) == 0.0);
  CHECK(empirical_risk({1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(empirical_risk({}), DomainError);
}

TEST_CASE("select_valid_configs thresholds") {
  std::vector<std::pair<Lambda, double>> pv{{Lambda{0, 0, 0}, 1.0}, {Lambda{0.5, 0.5, 0.5}, 1.0}};
  CHECK(select_valid_configs(pv, 0.05, 1030301).threshold == doctest::Approx(4.853e-8).epsilon(1e-3));
  CHECK(select_valid_configs(pv, 0.05, 1000).threshold == doctest::Approx(5e-5));
  CHECK(select_valid_configs(pv, 0.05, 2).configs.empty());
  pv[1].second = 1e-6;
  auto v = select_valid_configs(pv, 0.05, 1000);
  REQUIRE(v.configs.size() == 1);
  CHECK(v.configs[0].first == Lambda{0.5, 0.5, 0.5});
}

TEST_CASE("selection objective examples") {
  CHECK(objective_term(1, 1, 1, 0.5, 0.5) == 0.5);
  CHECK(objective_term(3, 10, 4, 0.5, 0.5) == doctest::Approx(1.8));
  CHECK(objective_term(3, 10, 4, 0.0, 0.5) == doctest::Approx(0.3));
  CHECK(objective_term(2, 5, 0, 0.5, 0.5) == doctest::Approx(1.5));
  CHECK(objective_term(2, 5, 9, 0.5, 0.5) == doctest::Approx(1.0));

  // Record whose first sample is admissible, correct and certain.
  CalibrationRecord r;
  r.samples.push_back(SampleSummary{1, 1, 1.0, 0.0, "SingleCorrect", "clean"});
  r.diversity.resize(1);
  r.first_correct = 1;
  CalibrationSettings s;
  CHECK(selection_objective({r, r, r}, Lambda{0.5, 0.5, 0.5}, s) == 0.5);
}

TEST_CASE("build_conformal_set degenerate thresholds") {
  Rng rng(5);
  auto bundle = metrics::rouge_bundle();
  Stream invalid = random_stream(rng, 20, 0.0, 0.0);
  std::size_t calls = 0;
  DrawFn draw_invalid = [&](std::size_t i) {
    ++calls;
    return invalid.samples.at(i);
  };
  auto set = build_conformal_set(draw_invalid, bundle, syntax_admission(), Lambda{0, 1, 0}, 20);
  CHECK(set.members.empty());
  CHECK(set.draws == 20);
  CHECK(calls == 20);
  CHECK(set_loss(set, syntax_admission()) == 1);

  Stream valid = random_stream(rng, 20, 1.0, 0.0);
  DrawFn draw_valid = [&](std::size_t i) { return valid.samples.at(i); };
  set = build_conformal_set(draw_valid, bundle, syntax_admission(), Lambda{0, 1, 1}, 20);
  CHECK(set.members.size() == 20);
  CHECK(set.draws == 20);
  CHECK(set_loss(set, syntax_admission()) == 0);

  set = build_conformal_set(draw_valid, bundle, syntax_admission(), Lambda{1, 1, 0}, 20);
  CHECK(set.members.empty());

  set = build_conformal_set(draw_valid, bundle, syntax_admission(), Lambda{0, 1, 0}, 20);
  CHECK(set.members.size() == 1);
  CHECK(set.draws == 1);

  CHECK_THROWS_AS(build_conformal_set(draw_valid, bundle, syntax_admission(), Lambda{}, 0),
                  ConfigError);
}

TEST_CASE("build_conformal_set flags sampler failure as degraded") {
  Rng rng(6);
  Stream st = random_stream(rng, 20, 1.0, 0.0);
  DrawFn draw = [&](std::size_t i) {
    if (i == 3) throw SamplerError("connection reset");
    return st.samples.at(i);
  };
  auto set = build_conformal_set(draw, metrics::rouge_bundle(), syntax_admission(), Lambda{0, 1, 1}, 20);
  CHECK(set.degraded);
  CHECK(set.degraded_reason == "connection reset");
  CHECK(set.members.size() == 3);
  CHECK(set.draws == 3);
}

TEST_CASE("replay of a cached record equals live construction") {
  Rng rng(7);
  auto bundle = metrics::rouge_bundle();
  CalibrationSettings settings;
  auto grid = LambdaGrid::uniform(10);
  for (int trial = 0; trial < 300; ++trial) {
    Stream st = random_stream(rng, 1 + rng.index(20), rng.uniform(), 0.5);
    CalibrationRecord rec = record_of(st, "e");
    DrawFn draw = [&](std::size_t i) {
      if (i >= st.samples.size()) throw SamplerError("exhausted");
      return st.samples[i];
    };
    for (int c = 0; c < 20; ++c) {
      Lambda l = grid.at(rng.index(grid.size()));
      auto live = build_conformal_set(draw, bundle, syntax_admission(), l, settings.k);
      Replay rep = replay_record(rec, l, settings);
      REQUIRE(live.member_draws == rep.members);
      REQUIRE(live.draws == rep.draws);
      REQUIRE(set_loss(live, syntax_admission()) == rep.loss);
      // Admission-filtered construction: loss 0 iff non-empty.
      REQUIRE((rep.loss == 0) == !live.members.empty());
    }
  }
}

TEST_CASE("loosening the diversity bound without early stopping gives a superset") {
  Rng rng(8);
  CalibrationSettings settings;
  for (int trial = 0; trial < 300; ++trial) {
    Stream st = random_stream(rng, 20, rng.uniform(), 0.5);
    CalibrationRecord rec = record_of(st, "e");
    double l1 = rng.index(5) / 10.0;
    double l2 = rng.index(11) / 10.0;
    auto tight = replay_record(rec, Lambda{l1, l2, 1.0}, settings).members;
    auto loose = replay_record(rec, Lambda{l1, 1.0, 1.0}, settings).members;
    for (std::size_t m : tight) {
      REQUIRE(std::find(loose.begin(), loose.end(), m) != loose.end());
    }
  }
}

TEST_CASE("calibration sweep agrees with per-config replay") {
  Rng rng(9);
  std::vector<CalibrationRecord> records;
  for (int i = 0; i < 40; ++i) {
    records.push_back(record_of(random_stream(rng, 20, rng.uniform(0.05, 0.9), 0.4), "e" + std::to_string(i)));
  }
  CalibrationSettings s = small_settings();
  auto res = calibrate(records, s);
  for (std::size_t idx = 0; idx < s.grid.size(); ++idx) {
    Lambda l = s.grid.at(idx);
    std::size_t losses = 0;
    for (const auto& r : records) losses += replay_record(r, l, s).loss;
    REQUIRE(res.loss_counts[idx / s.grid.axis3.size()] == losses);
    REQUIRE(res.objectives[idx] == doctest::Approx(selection_objective(records, l, s)).epsilon(1e-12));
  }
  CalibrationSettings threaded = s;
  threaded.threads = 3;
  auto res3 = calibrate(records, threaded);
  CHECK(res3.objectives == res.objectives);
  CHECK(res3.loss_counts == res.loss_counts);
  CHECK(res3.lambda_star == res.lambda_star);
}

TEST_CASE("calibration picks a valid minimiser and the smallest valid epsilon") {
  Rng rng(10);
  std::vector<CalibrationRecord> records;
  for (int i = 0; i < 200; ++i) {
    records.push_back(record_of(random_stream(rng, 20, rng.uniform(0.1, 0.6), 0.5), "e" + std::to_string(i)));
  }
  CalibrationSettings s = small_settings();
  auto res = calibrate(records, s);
  REQUIRE(res.ok);
  CHECK(res.threshold == doctest::Approx(0.05 / 125));
  CHECK(res.pvalue <= res.threshold);
  for (const auto& [l, p] : res.valid.configs) CHECK(p <= res.threshold);
  // ε* is the smallest grid ε where any config is valid.
  std::size_t e_star = 0;
  while (s.epsilon_grid[e_star] < res.epsilon_star) ++e_star;
  REQUIRE(s.epsilon_grid[e_star] == res.epsilon_star);
  for (std::size_t idx = 0; idx < s.grid.size(); ++idx) {
    if (e_star > 0) CHECK(res.pvalue_at(s.grid, idx, e_star - 1) > res.threshold);
  }
  for (const auto& [l, p] : res.valid.configs) {
    CHECK(selection_objective(records, l, s) >= res.objective - 1e-12);
  }

  CalibrationSettings pinned = s;
  pinned.pinned_epsilon = 0.5;
  auto rp = calibrate(records, pinned);
  REQUIRE(rp.ok);
  CHECK(rp.epsilon_star <= 0.5);
  CHECK(rp.objective <= res.objective + 1e-12);
  CHECK(binomial_cdf(200, rp.epsilon_star, static_cast<std::size_t>(std::lround(rp.empirical_risk * 200))) <=
        rp.threshold);
}

TEST_CASE("calibration with an always-correct first draw") {
  std::vector<CalibrationRecord> records;
  for (int i = 0; i < 100; ++i) {
    Stream st;
    for (int k = 0; k < 20; ++k) {
      Sample x;
      x.text = "left(\"A\", \"B\"). v" + std::to_string(k);
      x.token_logprobs = {-0.01, -0.02};
      x.admissible = 1;
      st.samples.push_back(x);
      st.correct.push_back(1);
    }
    records.push_back(record_of(st, "e" + std::to_string(i)));
  }
  CalibrationSettings s;
  auto res = calibrate(records, s);
  REQUIRE(res.ok);
  CHECK(res.objective == doctest::Approx(0.5));
  CHECK(replay_record(records[0], res.lambda_star, s).set_size == 1);
  CHECK(res.empirical_risk == 0.0);
}

TEST_CASE("single-entry calibration with delta 0.5") {
  Stream st;
  Sample x;
  x.text = "a b";
  x.token_logprobs = {-0.1};
  x.admissible = 1;
  st.samples.push_back(x);
  st.correct.push_back(1);
  std::vector<CalibrationRecord> records{record_of(st, "only")};
  CalibrationSettings s;
  s.delta = 0.5;
  s.grid = LambdaGrid{{0.0}, {1.0}, {0.0}};
  auto res = calibrate(records, s);
  REQUIRE(res.ok);
  // n = 1, zero losses: p = 1 - ε, valid once 1 - ε <= 0.5.
  CHECK(res.epsilon_star == 0.5);
  CHECK(res.pvalue == doctest::Approx(0.5));

  s.grid = LambdaGrid{{0.0, 0.5}, {1.0}, {0.0}};
  res = calibrate(records, s);
  REQUIRE(res.ok);
  CHECK(res.epsilon_star == 0.75);
}

TEST_CASE("calibration failure reports the best invalid config") {
  Rng rng(11);
  std::vector<CalibrationRecord> records;
  for (int i = 0; i < 30; ++i) records.push_back(record_of(random_stream(rng, 20, 0.0, 0.0), "e"));
  CalibrationSettings s = small_settings();
  auto res = calibrate(records, s);
  CHECK_FALSE(res.ok);
  CHECK(res.valid.configs.empty());
  CHECK(res.best_invalid_pvalue == 1.0);
  CHECK_THROWS_AS(calibrate({}, s), DomainError);
  s.rho1 = 0.0;
  s.rho2 = 0.0;
  CHECK_THROWS_AS(calibrate(records, s), ConfigError);
}

TEST_CASE("calibration record JSON round trip") {
  Rng rng(12);
  std::vector<CalibrationRecord> records;
  for (int i = 0; i < 10; ++i) records.push_back(record_of(random_stream(rng, 1 + rng.index(20), 0.5, 0.5), "e" + std::to_string(i)));
  std::stringstream ss;
  write_records(ss, records);
  auto back = read_records(ss);
  CHECK(back == records);
  CHECK_THROWS_AS(record_from_json("{\"id\": 3}"), ConfigError);
}

TEST_CASE("coverage trial with fixed admissibility") {
  auto source_with = [](double p_adm) {
    return [p_adm](std::size_t n, std::uint64_t seed) {
      Rng rng(seed);
      std::vector<CalibrationRecord> out;
      for (std::size_t i = 0; i < n; ++i) out.push_back(record_of(random_stream(rng, 20, p_adm, 0.5), "e"));
      return out;
    };
  };
  CalibrationSettings s = small_settings();
  auto all = coverage_trial(source_with(1.0), s, 100, 100, 5, 1);
  CHECK(all.violations == 0);
  CHECK(all.calibration_failures == 0);
  for (double r : all.test_risks) CHECK(r == 0.0);

  auto none = coverage_trial(source_with(0.0), s, 100, 100, 5, 1);
  CHECK(none.calibration_failures == 5);
  CHECK(none.violations == 0);

  auto mixed = coverage_trial(source_with(0.15), s, 100, 100, 10, 2);
  CHECK(mixed.violation_fraction() <= 0.2);
  auto [lo, hi] = mixed.violation_interval();
  CHECK(lo <= mixed.violation_fraction());
  CHECK(hi >= mixed.violation_fraction());
}

TEST_CASE("Clopper-Pearson interval") {
  CoverageReport r;
  r.trials = 100;
  r.violations = 5;
  auto [lo, hi] = r.violation_interval();
  CHECK(lo == doctest::Approx(0.0164).epsilon(0.01));
  CHECK(hi == doctest::Approx(0.1128).epsilon(0.01));
  r.violations = 0;
  CHECK(r.violation_interval().first == 0.0);
  CHECK(r.violation_interval().second == doctest::Approx(0.0362).epsilon(0.01));
}
