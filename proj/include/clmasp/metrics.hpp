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
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clmasp::metrics {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  std::string raw_text;
  std::string text;  // post-processed
  std::vector<double> token_logprobs;
  int admissible = 0;
  std::string origin;  // generator label, e.g. "clean" or an error class name

  bool operator==(const Sample&) const = default;
};

// exp(mean token logprob), in (0, 1]. Throws MetricError on empty logprobs.
double quality(const Sample& s);
double sequence_logprob(const Sample& s);

// Lowercased whitespace tokens.
std::vector<std::string> rouge_tokens(std::string_view text);
// Token strings mapped to dense ids, shared by the texts of one comparison.
class TokenInterner {
 public:
  std::vector<std::uint32_t> ids(std::string_view text);

 private:
  std::unordered_map<std::string, std::uint32_t> table_;
};

std::size_t lcs_length(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b);
double rouge_l(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b);
double rouge_l(const std::vector<std::string>& a, const std::vector<std::string>& b);
double rouge_l(std::string_view a, std::string_view b);

// Maps text to per-token logprobs under a judge model.
class JudgeScorer {
 public:
  virtual ~JudgeScorer() = default;
  virtual std::vector<double> score(std::string_view text) = 0;
};

// Deterministic hash-based logprobs, one per whitespace token.
class StubScorer : public JudgeScorer {
 public:
  std::vector<double> score(std::string_view text) override;
};

// Memoizes another scorer; safe for concurrent use.
class CachingScorer : public JudgeScorer {
 public:
  explicit CachingScorer(std::shared_ptr<JudgeScorer> inner) : inner_(std::move(inner)) {}
  std::vector<double> score(std::string_view text) override;
  std::size_t cache_size() const;

 private:
  std::shared_ptr<JudgeScorer> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::vector<double>> cache_;
};

double mean_judge_logprob(std::string_view text, JudgeScorer& scorer);
// |mean logprob(a) - mean logprob(b)|. Scorer failures become MetricError.
double judge_score(const Sample& a, const Sample& b, JudgeScorer& scorer);

// max over members of exp(sum of token logprobs); 0 for the empty set.
double confidence(const std::vector<Sample>& set);

enum class DiversityKind { kRougeL, kLlmJudge };
std::string_view diversity_name(DiversityKind k);
DiversityKind diversity_from_name(std::string_view name);  // throws MetricError

struct MetricBundle {
  DiversityKind diversity_kind = DiversityKind::kRougeL;
  std::function<double(const Sample&)> quality;
  std::function<double(const Sample&, const Sample&)> diversity;
  std::function<double(const std::vector<Sample>&)> confidence;
  // For kLlmJudge: the largest pairwise judge score seen during calibration.
  double judge_scale = 1.0;

  // Whether a candidate with diversity value `d` against a current member
  // passes the λ2 check.
  bool diversity_passes(double d, double lambda2) const;
  double self_similarity() const;
};

MetricBundle rouge_bundle();
MetricBundle judge_bundle(std::shared_ptr<JudgeScorer> scorer, double judge_scale = 1.0);

}  // namespace clmasp::metrics
