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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "clmasp/harness.hpp"
#include "clmasp/random.hpp"

namespace clmasp::harness {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCalibrationTag = 0xCA1;
constexpr std::uint64_t kTestTag = 0x7E57;
constexpr std::uint64_t kSamplerTag = 0x5A;
constexpr std::uint64_t kCalDrawTag = 0xC0A1;
constexpr std::uint64_t kEvalDrawTag = 0xE7A1;

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// exception after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (!stop) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<stepgame::Entry> read_entries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  try {
    return stepgame::read_jsonl(in);
  } catch (const std::exception& e) {
    throw ConfigError("bad dataset file " + path + ": " + e.what());
  }
}

std::string gold_of(const stepgame::Entry& e) { return std::string(stepgame::name(e.gold_answer)); }

std::string output_path(const ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

json lambda_json(const conformal::Lambda& l) {
  return {{"lambda1", l.lambda1}, {"lambda2", l.lambda2}, {"lambda3", l.lambda3}};
}

// Solves each distinct program text once per entry.
class Labeler {
 public:
  Labeler(const stepgame::Entry& e, LabelMode mode) : entry_(e), mode_(mode) {}

  const asp::Outcome& operator()(const metrics::Sample& s) {
    auto key = s.origin + '\x1f' + s.text;
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    return memo_.emplace(std::move(key), label_sample(s, entry_, mode_)).first->second;
  }

 private:
  const stepgame::Entry& entry_;
  LabelMode mode_;
  std::unordered_map<std::string, asp::Outcome> memo_;
};

}  // namespace

// ---- data -------------------------------------------------------------------------

std::vector<stepgame::Entry> calibration_entries(const ExperimentConfig& c) {
  if (!c.calibration_path.empty()) {
    auto all = read_entries(c.calibration_path);
    const int max_hops = c.calibration_variant == CalibrationVariant::kSingleHop1 ? 1 : 5;
    std::erase_if(all, [&](const stepgame::Entry& e) { return e.hops > max_hops; });
    if (all.size() < c.calibration_size) {
      throw ConfigError("calibration file has " + std::to_string(all.size()) +
                        " usable entries, need " + std::to_string(c.calibration_size));
    }
    all.resize(c.calibration_size);
    return all;
  }
  std::vector<stepgame::Entry> out;
  out.reserve(c.calibration_size);
  for (std::size_t i = 0; i < c.calibration_size; ++i) {
    int hops = c.calibration_variant == CalibrationVariant::kMixed1To5 ? static_cast<int>(i % 5) + 1 : 1;
    char id[32];
    std::snprintf(id, sizeof id, "cal-%06zu", i);
    out.push_back(stepgame::generate_entry(hops, derive_seed(c.seed, {kCalibrationTag, i}), {}, id));
  }
  return out;
}

std::map<int, std::vector<stepgame::Entry>> test_slices(const ExperimentConfig& c) {
  std::map<int, std::vector<stepgame::Entry>> out;
  if (!c.test_path.empty()) {
    stepgame::DatasetSplit split;
    split.name = stepgame::SplitName::kTest;
    split.entries = read_entries(c.test_path);
    for (const auto& [h, n] : c.test_slices) {
      try {
        out[h] = stepgame::sample_test_slice(split, h, n, derive_seed(c.seed, {kTestTag, static_cast<std::uint64_t>(h)}));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
    return out;
  }
  for (const auto& [h, n] : c.test_slices) {
    auto& slice = out[h];
    for (std::size_t i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "test-h%02d-%04zu", h, i);
      slice.push_back(stepgame::generate_entry(
          h, derive_seed(c.seed, {kTestTag, static_cast<std::uint64_t>(h), i}), {}, id));
    }
  }
  return out;
}

// ---- per-sample evaluation --------------------------------------------------------

asp::Outcome label_sample(const metrics::Sample& s, const stepgame::Entry& e, LabelMode mode) {
  if (!s.admissible) return {asp::OutcomeKind::kEmpty, "syntax"};
  const std::string gold = gold_of(e);
  if (mode == LabelMode::kGenerator) {
    if (s.origin == "clean") return {asp::OutcomeKind::kSingleCorrect, "answer(" + gold + ")"};
    try {
      auto kind = generator::expected_outcome(generator::error_class_from_name(s.origin));
      std::string note;
      if (kind == asp::OutcomeKind::kSingleCorrect) note = "answer(" + gold + ")";
      if (kind == asp::OutcomeKind::kSingleWrong) note = "answer(?)";
      return {kind, note};
    } catch (const generator::ConfigError&) {
    }
  }
  return asp::evaluate_program(s.text, gold);
}

conformal::CalibrationRecord build_record(const stepgame::Entry& e, generator::Sampler& sampler,
                                          const generator::PromptSpec& prompt,
                                          const metrics::MetricBundle& bundle,
                                          std::uint64_t seed, std::size_t k, LabelMode mode) {
  Labeler label(e, mode);
  std::vector<metrics::Sample> samples;
  std::vector<int> correct;
  std::vector<std::string> outcomes;
  for (std::size_t i = 0; i < k; ++i) {
    samples.push_back(sampler.draw(prompt, seed, i));
    const auto& o = label(samples.back());
    correct.push_back(o.kind == asp::OutcomeKind::kSingleCorrect);
    outcomes.emplace_back(asp::outcome_name(o.kind));
  }
  return conformal::make_record(e.id, e.hops, samples, correct, outcomes, bundle);
}

metrics::MetricBundle make_bundle(const ExperimentConfig& c, double judge_scale) {
  if (c.metric == metrics::DiversityKind::kRougeL) return metrics::rouge_bundle();
  std::shared_ptr<metrics::JudgeScorer> scorer;
  if (c.judge_kind == "endpoint") {
    scorer = std::make_shared<generator::HttpJudgeScorer>(c.judge_endpoint);
  } else {
    scorer = std::make_shared<metrics::StubScorer>();
  }
  return metrics::judge_bundle(std::make_shared<metrics::CachingScorer>(scorer), judge_scale);
}

// ---- calibration ------------------------------------------------------------------

namespace {

std::string calibration_report(const ExperimentConfig& c, const conformal::CalibrationResult& r,
                               const std::vector<conformal::CalibrationRecord>& records) {
  std::size_t admissible = 0, total = 0, with_correct = 0;
  for (const auto& rec : records) {
    for (const auto& s : rec.samples) admissible += s.admissible, ++total;
    with_correct += rec.first_correct > 0;
  }
  json j = {
      {"version", version_string()},
      {"config", json::parse(config_to_json(c))},
      {"ok", r.ok},
      {"n", r.n},
      {"grid_size", r.grid_size},
      {"threshold", r.threshold},
      {"metric", metrics::diversity_name(c.metric)},
      {"judge_scale", r.judge_scale},
      {"valid_configs", r.valid.configs.size()},
      {"sample_admissibility", total ? static_cast<double>(admissible) / static_cast<double>(total) : 0.0},
      {"entries_with_correct_sample", with_correct},
  };
  if (r.ok) {
    j["lambda_star"] = lambda_json(r.lambda_star);
    j["epsilon_star"] = r.epsilon_star;
    j["objective"] = r.objective;
    j["empirical_risk"] = r.empirical_risk;
    j["pvalue"] = r.pvalue;
  } else {
    j["best_invalid"] = lambda_json(r.best_invalid);
    j["best_invalid_pvalue"] = r.best_invalid_pvalue;
  }
  return j.dump(2);
}

}  // namespace

CalibrationArtifacts run_calibration(const ExperimentConfig& c, bool reuse_cache) {
  CalibrationArtifacts out;
  const auto entries = calibration_entries(c);
  const std::string cache = output_path(c, "calibration_cache.jsonl");

  bool loaded = false;
  if (reuse_cache && std::filesystem::exists(cache)) {
    std::ifstream in(cache);
    out.records = conformal::read_records(in);
    if (out.records.size() != entries.size()) {
      throw ConfigError("calibration cache has " + std::to_string(out.records.size()) +
                        " records, config expects " + std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (out.records[i].entry_id != entries[i].id) {
        throw ConfigError("calibration cache does not match config at " + entries[i].id);
      }
    }
    loaded = true;
  }

  if (!loaded) {
    auto sampler = generator::make_sampler(c.generator, derive_seed(c.seed, {kSamplerTag}));
    auto bundle = make_bundle(c);
    const std::uint64_t draw_seed = derive_seed(c.seed, {kCalDrawTag});
    out.records.resize(entries.size());
    parallel_for(entries.size(), c.threads, [&](std::size_t i) {
      auto prompt = generator::build_prompt(entries[i], c.icl_variant);
      out.records[i] = build_record(entries[i], *sampler, prompt, bundle, draw_seed,
                                    c.calibration.k, c.labels);
    });
    std::ostringstream ss;
    conformal::write_records(ss, out.records);
    write_file(cache, ss.str());
  }

  out.result = conformal::calibrate(out.records, c.calibration);
  out.report_json = calibration_report(c, out.result, out.records);
  write_file(output_path(c, "calibration_report.json"), out.report_json);
  return out;
}

CalibrationChoice read_calibration_report(const std::string& path) {
  try {
    json j = json::parse(read_file(path));
    if (!j.at("ok").get<bool>()) {
      throw CalibrationFailure("calibration report " + path + " records a failed calibration");
    }
    CalibrationChoice ch;
    const auto& l = j.at("lambda_star");
    ch.lambda = {l.at("lambda1").get<double>(), l.at("lambda2").get<double>(),
                 l.at("lambda3").get<double>()};
    ch.epsilon = j.at("epsilon_star").get<double>();
    ch.judge_scale = j.value("judge_scale", 1.0);
    return ch;
  } catch (const json::exception& e) {
    throw ConfigError("bad calibration report " + path + ": " + e.what());
  }
}

// ---- evaluation -------------------------------------------------------------------

namespace {

std::string clm_label(const ExperimentConfig& c) {
  return "CLM " + std::string(calibration_variant_name(c.calibration_variant)) + " " +
         std::string(metrics::diversity_name(c.metric));
}

std::vector<const stepgame::Entry*> flatten(const std::map<int, std::vector<stepgame::Entry>>& slices) {
  std::vector<const stepgame::Entry*> out;
  for (const auto& [h, v] : slices) {
    for (const auto& e : v) out.push_back(&e);
  }
  return out;
}

}  // namespace

TrialReport run_eval(const ExperimentConfig& c, const conformal::Lambda& lambda, double epsilon,
                     double judge_scale) {
  TrialReport r;
  r.kind = "clm";
  r.label = clm_label(c);
  r.metric = std::string(metrics::diversity_name(c.metric));
  r.config_json = config_to_json(c);
  r.lambda = lambda;
  r.epsilon = epsilon;

  const auto slices = test_slices(c);
  const auto entries = flatten(slices);
  auto sampler = generator::make_sampler(c.generator, derive_seed(c.seed, {kSamplerTag}));
  auto bundle = make_bundle(c, judge_scale);
  const std::uint64_t draw_seed = derive_seed(c.seed, {kEvalDrawTag});
  const bool correctness = c.calibration.loss == conformal::LossKind::kCorrectness;

  r.entries.resize(entries.size());
  parallel_for(entries.size(), c.threads, [&](std::size_t idx) {
    const stepgame::Entry& e = *entries[idx];
    auto prompt = generator::build_prompt(e, c.icl_variant);
    Labeler label(e, c.labels);
    std::vector<metrics::Sample> drawn;
    conformal::DrawFn draw = [&](std::size_t i) {
      drawn.push_back(sampler->draw(prompt, draw_seed, i));
      return drawn.back();
    };
    conformal::AdmissionFn admission = [&](const metrics::Sample& s) {
      if (correctness) return static_cast<int>(label(s).kind == asp::OutcomeKind::kSingleCorrect);
      return s.admissible;
    };
    auto set = conformal::build_conformal_set(draw, bundle, admission, lambda, c.calibration.k);

    EntryResult& res = r.entries[idx];
    res.id = e.id;
    res.hops = e.hops;
    res.set_size = set.members.size();
    res.draws = drawn.size();
    res.members = set.member_draws;
    res.degraded = set.degraded;
    for (const auto& s : drawn) {
      res.outcomes.emplace_back(asp::outcome_name(label(s).kind));
      res.origins.push_back(s.origin);
    }
    std::vector<asp::Outcome> member_outcomes;
    for (const auto& m : set.members) member_outcomes.push_back(label(m));
    res.correct = set_correct(member_outcomes, gold_of(e), c.vote);
  });
  summarize(r);
  return r;
}

TrialReport run_baseline(const ExperimentConfig& c) {
  TrialReport r;
  r.kind = "baseline";
  r.label = "Baseline " + std::string(generator::variant_name(c.icl_variant));
  r.metric = "none";
  r.config_json = config_to_json(c);

  const auto slices = test_slices(c);
  const auto entries = flatten(slices);
  auto sampler = generator::make_sampler(c.generator, derive_seed(c.seed, {kSamplerTag}));

  r.entries.resize(entries.size());
  parallel_for(entries.size(), c.threads, [&](std::size_t idx) {
    const stepgame::Entry& e = *entries[idx];
    auto prompt = generator::build_prompt(e, c.icl_variant);
    EntryResult& res = r.entries[idx];
    res.id = e.id;
    res.hops = e.hops;
    try {
      auto s = sampler->baseline(prompt);
      auto o = label_sample(s, e, c.labels);
      res.set_size = 1;
      res.draws = 1;
      res.members = {0};
      res.outcomes = {std::string(asp::outcome_name(o.kind))};
      res.origins = {s.origin};
      res.correct = o.kind == asp::OutcomeKind::kSingleCorrect;
    } catch (const conformal::SamplerError&) {
      res.degraded = true;
    }
  });
  summarize(r);
  return r;
}

// ---- coverage ---------------------------------------------------------------------

conformal::RecordSource synthetic_record_source(const ExperimentConfig& c) {
  if (c.generator.kind != generator::GeneratorKind::kSynthetic) {
    throw ConfigError("coverage simulation requires the synthetic generator");
  }
  return [c](std::size_t n, std::uint64_t seed) {
    generator::SyntheticSampler sampler(c.generator.synthetic, c.generator.stop_tokens, seed);
    auto bundle = make_bundle(c);
    std::vector<conformal::CalibrationRecord> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      int hops = c.calibration_variant == CalibrationVariant::kMixed1To5 ? static_cast<int>(i % 5) + 1 : 1;
      auto e = stepgame::generate_entry(hops, derive_seed(seed, {kCalibrationTag, i}), {},
                                        "cov-" + std::to_string(i));
      auto prompt = generator::build_prompt(e, c.icl_variant);
      out[i] = build_record(e, sampler, prompt, bundle, seed, c.calibration.k, c.labels);
    }
    return out;
  };
}

conformal::CoverageReport run_coverage_sim(const ExperimentConfig& c) {
  return conformal::coverage_trial(synthetic_record_source(c), c.calibration, c.coverage_n_cal,
                                   c.coverage_n_test, c.coverage_trials, c.seed);
}

std::string coverage_to_json(const conformal::CoverageReport& r, const ExperimentConfig& c) {
  auto [lo, hi] = r.violation_interval();
  json risks = json::array(), eps = json::array();
  for (double x : r.test_risks) risks.push_back(std::isnan(x) ? json(nullptr) : json(x));
  for (double x : r.epsilons) eps.push_back(std::isnan(x) ? json(nullptr) : json(x));
  json j = {
      {"version", version_string()},
      {"config", json::parse(config_to_json(c))},
      {"trials", r.trials},
      {"violations", r.violations},
      {"calibration_failures", r.calibration_failures},
      {"violation_fraction", r.violation_fraction()},
      {"violation_interval", {lo, hi}},
      {"delta", c.calibration.delta},
      {"test_risks", risks},
      {"epsilons", eps},
  };
  return j.dump(2);
}

}  // namespace clmasp::harness
