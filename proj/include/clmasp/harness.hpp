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

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clmasp/asp/outcome.hpp"
#include "clmasp/conformal.hpp"
#include "clmasp/generator.hpp"
#include "clmasp/metrics.hpp"
#include "clmasp/stepgame.hpp"

namespace clmasp::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CalibrationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CalibrationVariant { kMixed1To5, kSingleHop1 };
std::string_view calibration_variant_name(CalibrationVariant v);
CalibrationVariant calibration_variant_from_name(std::string_view name);
// Prompt paired with each calibration set.
generator::IclVariant paired_icl_variant(CalibrationVariant v);

enum class VoteRule { kAny, kPlurality };
// kSolve runs the solver on every sample; kGenerator reads the outcome from a
// synthetic sample's error class (falls back to solving for other origins).
enum class LabelMode { kSolve, kGenerator };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  CalibrationVariant calibration_variant = CalibrationVariant::kMixed1To5;
  generator::IclVariant icl_variant = generator::IclVariant::kTwoPlusFour;
  std::size_t calibration_size = 500;
  std::map<int, std::size_t> test_slices = {{1, 200}, {2, 200}, {3, 200},
                                            {4, 200}, {5, 200}, {15, 200}};
  std::string calibration_path;  // optional JSONL of entries
  std::string test_path;         // optional JSONL of entries
  generator::GeneratorSpec generator;
  metrics::DiversityKind metric = metrics::DiversityKind::kRougeL;
  std::string judge_kind = "stub";  // stub | endpoint
  generator::EndpointSettings judge_endpoint;
  conformal::CalibrationSettings calibration;
  double grid_step = 0.05;
  VoteRule vote = VoteRule::kAny;
  LabelMode labels = LabelMode::kSolve;
  std::size_t threads = 1;
  std::size_t coverage_trials = 100;
  std::size_t coverage_n_cal = 200;
  std::size_t coverage_n_test = 200;

  void validate() const;  // throws ConfigError
};

// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& c);

std::string version_string();

// ---- data -------------------------------------------------------------------------

std::vector<stepgame::Entry> calibration_entries(const ExperimentConfig& c);
std::map<int, std::vector<stepgame::Entry>> test_slices(const ExperimentConfig& c);

// ---- per-sample evaluation --------------------------------------------------------

asp::Outcome label_sample(const metrics::Sample& s, const stepgame::Entry& e, LabelMode mode);

conformal::CalibrationRecord build_record(const stepgame::Entry& e, generator::Sampler& sampler,
                                          const generator::PromptSpec& prompt,
                                          const metrics::MetricBundle& bundle,
                                          std::uint64_t seed, std::size_t k, LabelMode mode);

metrics::MetricBundle make_bundle(const ExperimentConfig& c, double judge_scale = 1.0);

// ---- runs -------------------------------------------------------------------------

struct CalibrationArtifacts {
  conformal::CalibrationResult result;
  std::vector<conformal::CalibrationRecord> records;
  std::string report_json;
};

// Writes calibration_cache.jsonl and calibration_report.json under
// output_dir. With reuse_cache, an existing cache replaces sampling.
CalibrationArtifacts run_calibration(const ExperimentConfig& c, bool reuse_cache = false);

struct EntryResult {
  std::string id;
  int hops = 0;
  std::size_t set_size = 0;
  std::size_t draws = 0;
  std::vector<std::size_t> members;
  std::vector<std::string> outcomes;  // one per drawn sample
  std::vector<std::string> origins;   // one per drawn sample
  bool correct = false;
  bool degraded = false;
};

struct HopSummary {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n); }
};

struct TrialReport {
  std::string kind;  // clm | baseline
  std::string label;
  std::string metric;
  std::string config_json;
  std::optional<conformal::Lambda> lambda;
  std::optional<double> epsilon;
  std::vector<EntryResult> entries;
  std::map<int, HopSummary> per_hop;
  std::vector<std::pair<std::string, std::size_t>> histogram;  // by prevalence
  std::size_t total_samples = 0;
  std::size_t degraded = 0;
};

// Rebuilds per_hop, histogram and total_samples from entries.
void summarize(TrialReport& r);
std::string report_to_json(const TrialReport& r);
TrialReport report_from_json(const std::string& text);

// kAny: some member is SingleCorrect. kPlurality: the most frequent single
// answer among members (ties go to the earliest) equals gold.
bool set_correct(const std::vector<asp::Outcome>& member_outcomes, std::string_view gold,
                 VoteRule rule);

TrialReport run_eval(const ExperimentConfig& c, const conformal::Lambda& lambda,
                     double epsilon, double judge_scale = 1.0);
TrialReport run_baseline(const ExperimentConfig& c);

// Reads λ*, ε* and the judge scale from a calibration report.
struct CalibrationChoice {
  conformal::Lambda lambda;
  double epsilon = 1.0;
  double judge_scale = 1.0;
};
CalibrationChoice read_calibration_report(const std::string& path);

conformal::RecordSource synthetic_record_source(const ExperimentConfig& c);
conformal::CoverageReport run_coverage_sim(const ExperimentConfig& c);
std::string coverage_to_json(const conformal::CoverageReport& r, const ExperimentConfig& c);

// Accuracy table, outcome histogram and (when two runs differ only in the
// diversity metric) a metric comparison. Throws ConfigError on no reports.
struct Rendered {
  std::string text;
  std::string json;
};
Rendered render_reports(const std::vector<TrialReport>& reports);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace clmasp::harness
