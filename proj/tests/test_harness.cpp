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
#include <filesystem>

#include <doctest.h>
#include <json.hpp>

#include "clmasp/harness.hpp"
#include "clmasp/random.hpp"

using namespace clmasp;
using harness::ExperimentConfig;

namespace {

std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("clmasp_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

ExperimentConfig small_config(const std::string& out, double clean = 0.45) {
  nlohmann::json j = {
      {"output_dir", out},
      {"calibration_size", 60},
      {"test_slices", {{"1", 40}, {"4", 40}}},
      {"generator", {{"kind", "synthetic"}, {"synthetic", {{"clean", clean}}}}},
      {"calibration", {{"k", 8}, {"grid_step", 0.25}}},
  };
  return harness::config_from_json(j.dump());
}

}  // namespace

TEST_CASE("config defaults, round trip and rejection") {
  auto c = harness::config_from_json("{}");
  CHECK(c.seed == 1);
  CHECK(c.calibration.grid.size() == 21u * 21u * 21u);
  CHECK(c.icl_variant == generator::IclVariant::kTwoPlusFour);

  auto again = harness::config_from_json(harness::config_to_json(c));
  CHECK(harness::config_to_json(again) == harness::config_to_json(c));

  auto single = harness::config_from_json(R"({"calibration_variant": "single_hop_1"})");
  CHECK(single.icl_variant == generator::IclVariant::kOneHop);

  CHECK_THROWS_AS(harness::config_from_json(R"({"bogus": 1})"), harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"calibration": {"bogus": 1}})"), harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"calibration_variant": "single_hop_1",
                                                "icl_variant": "two_plus_four"})"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"calibration": {"grid_step": 0.3}})"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"metric": "bleu"})"), harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"generator": {"kind": "gpt"}})"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"generator": {"synthetic": {"clean": 1.5}}})"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(R"({"test_slices": {"30": 5}})"), harness::ConfigError);
  CHECK_THROWS_AS(harness::config_from_json("{"), harness::ConfigError);
}

TEST_CASE("calibration and test entries") {
  auto c = small_config(temp_dir("entries"));
  auto cal = harness::calibration_entries(c);
  REQUIRE(cal.size() == 60);
  CHECK(cal[0].id == "cal-000000");
  for (std::size_t i = 0; i < cal.size(); ++i) CHECK(cal[i].hops == static_cast<int>(i % 5) + 1);
  CHECK(harness::calibration_entries(c) == cal);

  c.calibration_variant = harness::CalibrationVariant::kSingleHop1;
  for (const auto& e : harness::calibration_entries(c)) CHECK(e.hops == 1);

  auto slices = harness::test_slices(c);
  REQUIRE(slices.size() == 2);
  CHECK(slices[4].size() == 40);
  CHECK(slices[4][3].id == "test-h04-0003");
  for (const auto& e : slices[4]) CHECK(e.hops == 4);
}

TEST_CASE("set_correct voting") {
  using asp::Outcome;
  using asp::OutcomeKind;
  Outcome right{OutcomeKind::kSingleCorrect, "answer(left)"};
  Outcome wrong{OutcomeKind::kSingleWrong, "answer(right)"};
  Outcome none{OutcomeKind::kNoAnswerAtom, ""};

  CHECK(harness::set_correct({none, right}, "left", harness::VoteRule::kAny));
  CHECK_FALSE(harness::set_correct({none, wrong}, "left", harness::VoteRule::kAny));
  CHECK_FALSE(harness::set_correct({}, "left", harness::VoteRule::kAny));

  CHECK(harness::set_correct({wrong, right, right}, "left", harness::VoteRule::kPlurality));
  CHECK_FALSE(harness::set_correct({wrong, wrong, right}, "left", harness::VoteRule::kPlurality));
  CHECK_FALSE(harness::set_correct({wrong, right}, "left", harness::VoteRule::kPlurality));
  CHECK(harness::set_correct({right, wrong}, "left", harness::VoteRule::kPlurality));
  CHECK_FALSE(harness::set_correct({none, none}, "left", harness::VoteRule::kPlurality));
}

TEST_CASE("generator labels agree with solving") {
  auto c = small_config(temp_dir("labels"), 0.2);
  generator::SyntheticSampler sampler(c.generator.synthetic, c.generator.stop_tokens, 11);
  for (int i = 0; i < 200; ++i) {
    auto e = stepgame::generate_entry(1 + i % 6, derive_seed(5, {static_cast<std::uint64_t>(i)}));
    auto prompt = generator::build_prompt(e, c.icl_variant);
    auto s = sampler.draw(prompt, 3, static_cast<std::size_t>(i));
    auto fast = harness::label_sample(s, e, harness::LabelMode::kGenerator);
    auto slow = harness::label_sample(s, e, harness::LabelMode::kSolve);
    CHECK_MESSAGE(fast.kind == slow.kind, s.origin);
  }
}

TEST_CASE("all-clean generator gives perfect accuracy") {
  auto c = small_config(temp_dir("clean"), 1.0);
  auto art = harness::run_calibration(c);
  REQUIRE(art.result.ok);
  auto clm = harness::run_eval(c, art.result.lambda_star, art.result.epsilon_star);
  auto base = harness::run_baseline(c);
  for (const auto* r : {&clm, &base}) {
    for (const auto& [h, s] : r->per_hop) CHECK(s.accuracy() == 1.0);
  }
}

TEST_CASE("accuracy with every admissible draw kept matches the binomial oracle") {
  auto c = small_config(temp_dir("oracle"));
  c.test_slices = {{2, 300}, {3, 300}};
  c.calibration.k = 3;
  c.labels = harness::LabelMode::kGenerator;
  // Correct samples are clean ones plus truncated ones repaired by post-processing.
  double p = c.generator.synthetic.clean +
             c.generator.synthetic.errors.at(generator::ErrorClass::kIncompleteTrailingLine);
  double expected = 1.0 - std::pow(1.0 - p, 3);
  auto r = harness::run_eval(c, {0.0, 1.0, 1.0}, 1.0);
  std::size_t n = 0, correct = 0;
  for (const auto& [h, s] : r.per_hop) n += s.n, correct += s.correct;
  double acc = static_cast<double>(correct) / static_cast<double>(n);
  double sd = std::sqrt(expected * (1 - expected) / static_cast<double>(n));
  CHECK(std::fabs(acc - expected) < 4 * sd);
}

TEST_CASE("larger confidence floor never lowers set accuracy") {
  auto c = small_config(temp_dir("dominance"));
  c.labels = harness::LabelMode::kGenerator;
  auto full = harness::run_eval(c, {0.3, 1.0, 1.0}, 1.0);
  for (double l3 : {0.0, 0.001, 0.5}) {
    auto part = harness::run_eval(c, {0.3, 1.0, l3}, 1.0);
    REQUIRE(part.entries.size() == full.entries.size());
    for (std::size_t i = 0; i < part.entries.size(); ++i) {
      CHECK(part.entries[i].set_size <= full.entries[i].set_size);
      if (part.entries[i].correct) CHECK(full.entries[i].correct);
    }
  }
}

TEST_CASE("histogram counts every drawn sample") {
  auto c = small_config(temp_dir("hist"));
  auto r = harness::run_eval(c, {0.2, 0.9, 0.5}, 1.0);
  std::size_t hist = 0, draws = 0;
  for (const auto& [name, n] : r.histogram) hist += n;
  for (const auto& e : r.entries) {
    draws += e.draws;
    CHECK(e.outcomes.size() == e.draws);
    CHECK(e.members.size() == e.set_size);
  }
  CHECK(hist == r.total_samples);
  CHECK(draws == r.total_samples);
  for (std::size_t i = 1; i < r.histogram.size(); ++i) {
    CHECK(r.histogram[i - 1].second >= r.histogram[i].second);
  }
}

TEST_CASE("calibrate and eval are deterministic") {
  auto dir = temp_dir("determinism");
  auto c = small_config(dir);
  auto a = harness::run_calibration(c);
  auto ea = harness::report_to_json(harness::run_eval(c, a.result.lambda_star, a.result.epsilon_star));
  auto cache = harness::read_file(dir + "/calibration_cache.jsonl");
  auto b = harness::run_calibration(c);
  auto eb = harness::report_to_json(harness::run_eval(c, b.result.lambda_star, b.result.epsilon_star));
  CHECK(a.report_json == b.report_json);
  CHECK(ea == eb);
  CHECK(cache == harness::read_file(dir + "/calibration_cache.jsonl"));

  auto reused = harness::run_calibration(c, true);
  CHECK(reused.report_json == a.report_json);

  c.threads = 3;
  c.calibration.threads = 2;
  auto threaded = harness::run_calibration(c);
  CHECK(threaded.records == a.records);
  CHECK(threaded.result.lambda_star == a.result.lambda_star);
}

TEST_CASE("calibration report feeds eval") {
  auto dir = temp_dir("report_io");
  auto c = small_config(dir);
  auto art = harness::run_calibration(c);
  REQUIRE(art.result.ok);
  auto ch = harness::read_calibration_report(dir + "/calibration_report.json");
  CHECK(ch.lambda == art.result.lambda_star);
  CHECK(ch.epsilon == art.result.epsilon_star);

  c.generator.synthetic = generator::SyntheticSettings::with_default_mix(0.0);
  c.generator.synthetic.admissibility_range = std::make_pair(0.0, 0.0);
  c.output_dir = temp_dir("report_fail");
  auto failed = harness::run_calibration(c);
  CHECK_FALSE(failed.result.ok);
  CHECK_THROWS_AS(harness::read_calibration_report(c.output_dir + "/calibration_report.json"),
                  harness::CalibrationFailure);
}

TEST_CASE("trial report round trip and rendering") {
  auto c = small_config(temp_dir("render"));
  auto rouge = harness::run_eval(c, {0.2, 0.9, 0.5}, 0.2);
  auto back = harness::report_from_json(harness::report_to_json(rouge));
  CHECK(harness::report_to_json(back) == harness::report_to_json(rouge));

  CHECK_THROWS_AS(harness::render_reports({}), harness::ConfigError);

  auto base = harness::run_baseline(c);
  auto plain = harness::render_reports({rouge, base});
  CHECK(plain.text.find("Accuracy") != std::string::npos);
  CHECK(plain.text.find("metric comparison") == std::string::npos);

  c.metric = metrics::DiversityKind::kLlmJudge;
  c.calibration.diversity = c.metric;
  auto judge = harness::run_eval(c, {0.2, 0.5, 0.5}, 0.2);
  auto both = harness::render_reports({rouge, judge, base});
  CHECK(both.text.find("metric comparison") != std::string::npos);
  auto j = nlohmann::json::parse(both.json);
  CHECK(j.at("runs").size() == 3);
  CHECK(j.at("metric_comparison").size() == 1);
}

TEST_CASE("coverage simulation needs the synthetic generator") {
  auto c = small_config(temp_dir("coverage"));
  c.coverage_trials = 3;
  c.coverage_n_cal = 30;
  c.coverage_n_test = 30;
  c.labels = harness::LabelMode::kGenerator;
  auto r = harness::run_coverage_sim(c);
  CHECK(r.trials == 3);
  auto j = nlohmann::json::parse(harness::coverage_to_json(r, c));
  CHECK(j.at("trials") == 3);

  c.generator.kind = generator::GeneratorKind::kReplay;
  CHECK_THROWS_AS(harness::synthetic_record_source(c), harness::ConfigError);
}
