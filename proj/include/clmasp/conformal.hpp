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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clmasp/metrics.hpp"

namespace clmasp::conformal {

using metrics::Sample;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Thrown by a sampler that cannot produce the next draw.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Lambda {
  double lambda1 = 0.0;  // quality floor
  double lambda2 = 1.0;  // diversity bound
  double lambda3 = 0.0;  // confidence floor
  bool operator==(const Lambda&) const = default;
};

struct ThresholdConfig {
  Lambda lambda;
  double epsilon = 0.1;
  double delta = 0.05;

  void validate() const;  // throws ConfigError
};

// Cartesian grid over (λ1, λ2, λ3); each axis is {0, step, 2 step, ..., 1}.
struct LambdaGrid {
  std::vector<double> axis1;
  std::vector<double> axis2;
  std::vector<double> axis3;

  static LambdaGrid uniform(int divisions);  // divisions = 1 / step
  static LambdaGrid coarse() { return uniform(20); }
  static LambdaGrid full() { return uniform(100); }

  std::size_t size() const { return axis1.size() * axis2.size() * axis3.size(); }
  Lambda at(std::size_t index) const;
  std::size_t index(std::size_t i1, std::size_t i2, std::size_t i3) const {
    return (i1 * axis2.size() + i2) * axis3.size() + i3;
  }
};

std::vector<double> default_epsilon_grid();  // {0, 0.01, ..., 1}

enum class LossKind { kSyntax, kCorrectness };

struct CalibrationSettings {
  LambdaGrid grid = LambdaGrid::coarse();
  std::vector<double> epsilon_grid = default_epsilon_grid();
  double delta = 0.05;
  double rho1 = 0.5;
  double rho2 = 0.5;
  std::size_t k = 20;
  std::optional<double> pinned_epsilon;
  LossKind loss = LossKind::kSyntax;
  metrics::DiversityKind diversity = metrics::DiversityKind::kRougeL;
  std::size_t threads = 1;

  void validate() const;  // throws ConfigError
};

// ---- set construction ----------------------------------------------------------

using DrawFn = std::function<Sample(std::size_t draw_index)>;
using AdmissionFn = std::function<int(const Sample&)>;

struct ConformalSet {
  std::vector<Sample> members;
  std::vector<std::size_t> member_draws;  // 0-based draw index of each member
  std::size_t draws = 0;                  // S_λ: samples drawn before stopping
  bool degraded = false;                  // sampler failed mid-stream
  std::string degraded_reason;
};

ConformalSet build_conformal_set(const DrawFn& draw, const metrics::MetricBundle& metrics,
                                 const AdmissionFn& admission, const Lambda& lambda,
                                 std::size_t k);

int set_loss(const ConformalSet& set, const AdmissionFn& admission);
double empirical_risk(const std::vector<int>& losses);

// P(Bin(n, eps) <= m), summed in log space.
double binomial_cdf(std::size_t n, double epsilon, std::size_t m);
// P(Bin(n, eps) <= floor(n * risk)).
double binomial_tail_pvalue(std::size_t n, double epsilon, double empirical_risk);
// cdf[m] = P(Bin(n, eps) <= m) for m = 0..n; identical to binomial_cdf values.
std::vector<double> binomial_cdf_table(std::size_t n, double epsilon);

struct ValidSet {
  std::vector<std::pair<Lambda, double>> configs;  // (λ, p-value)
  std::optional<Lambda> chosen;
  double threshold = 0.0;  // delta / grid_size
};

ValidSet select_valid_configs(const std::vector<std::pair<Lambda, double>>& pvalues, double delta,
                              std::size_t grid_size);

// ---- calibration records ---------------------------------------------------------

struct SampleSummary {
  int admissible = 0;
  int correct = 0;  // solved outcome is SingleCorrect
  double quality = 0.0;
  double seq_logprob = 0.0;
  std::string outcome;
  std::string origin;
  bool operator==(const SampleSummary&) const = default;
};

struct CalibrationRecord {
  std::string entry_id;
  int hops = 0;
  std::vector<SampleSummary> samples;             // draw order, at most k
  std::vector<std::vector<double>> diversity;     // diversity[i][j] for j < i
  std::size_t first_correct = 0;                  // S*, 1-based; 0 = no correct sample

  double diversity_between(std::size_t i, std::size_t j) const;
  bool operator==(const CalibrationRecord&) const = default;
};

// Builds a record from already drawn samples. `correct[i]` marks samples whose
// solved outcome is SingleCorrect.
CalibrationRecord make_record(std::string entry_id, int hops, const std::vector<Sample>& samples,
                              const std::vector<int>& correct,
                              const std::vector<std::string>& outcomes,
                              const metrics::MetricBundle& bundle);

std::string record_to_json(const CalibrationRecord& r);
CalibrationRecord record_from_json(const std::string& line);
void write_records(std::ostream& out, const std::vector<CalibrationRecord>& records);
std::vector<CalibrationRecord> read_records(std::istream& in);

// Largest pairwise diversity value among admissible samples across records.
double observed_judge_range(const std::vector<CalibrationRecord>& records);

// Outcome of replaying one record under one λ.
struct Replay {
  std::size_t set_size = 0;
  std::size_t draws = 0;
  int loss = 1;
  std::vector<std::size_t> members;  // draw indices
};

Replay replay_record(const CalibrationRecord& record, const Lambda& lambda,
                     const CalibrationSettings& settings, double judge_scale = 1.0);

// Per-entry term of the selection objective.
double objective_term(std::size_t set_size, std::size_t draws, std::size_t first_correct,
                      double rho1, double rho2);
double selection_objective(const std::vector<CalibrationRecord>& records, const Lambda& lambda,
                           const CalibrationSettings& settings, double judge_scale = 1.0);

// ---- calibration -----------------------------------------------------------------

struct CalibrationResult {
  bool ok = false;
  std::size_t n = 0;
  std::size_t grid_size = 0;
  double threshold = 0.0;  // delta / |Λ|
  Lambda lambda_star;
  double epsilon_star = 1.0;
  double objective = 0.0;
  double empirical_risk = 0.0;  // at λ*
  double pvalue = 1.0;          // at (λ*, ε*)
  ValidSet valid;               // valid configs at the ε used for selection
  // Diagnostics when ok == false: the config with the smallest p-value.
  Lambda best_invalid;
  double best_invalid_pvalue = 1.0;
  double judge_scale = 1.0;

  // Full p-value table, stored compactly: loss counts per (λ1, λ2) pair
  // (losses do not depend on λ3) and CDF values per ε.
  std::vector<std::size_t> loss_counts;      // indexed i1 * |axis2| + i2
  std::vector<std::vector<double>> cdf;      // cdf[e][m]
  std::vector<double> objectives;            // indexed by grid index
  double pvalue_at(const LambdaGrid& grid, std::size_t grid_index, std::size_t eps_index) const;
};

CalibrationResult calibrate(const std::vector<CalibrationRecord>& records,
                            const CalibrationSettings& settings);

// Re-chooses λ* among the configs valid at ε* using the objective measured on
// a validation slice.
CalibrationResult refine_on_validation(const CalibrationResult& result,
                                       const std::vector<CalibrationRecord>& validation,
                                       const CalibrationSettings& settings);

double test_risk(const std::vector<CalibrationRecord>& records, const Lambda& lambda,
                 const CalibrationSettings& settings, double judge_scale = 1.0);

// ---- coverage ---------------------------------------------------------------------

using RecordSource = std::function<std::vector<CalibrationRecord>(std::size_t n, std::uint64_t seed)>;

struct CoverageReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::size_t calibration_failures = 0;
  std::vector<double> test_risks;  // NaN for failed trials
  std::vector<double> epsilons;    // ε* per trial; NaN for failed trials
  std::vector<Lambda> lambdas;
  double violation_fraction() const;
  // Clopper-Pearson interval for the violation probability.
  std::pair<double, double> violation_interval(double level = 0.95) const;
};

CoverageReport coverage_trial(const RecordSource& source, const CalibrationSettings& settings,
                              std::size_t n_cal, std::size_t n_test, std::size_t trials,
                              std::uint64_t seed);

}  // namespace clmasp::conformal
