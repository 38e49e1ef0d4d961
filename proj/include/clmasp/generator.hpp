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

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "clmasp/asp/outcome.hpp"
#include "clmasp/conformal.hpp"
#include "clmasp/metrics.hpp"
#include "clmasp/stepgame.hpp"

namespace clmasp::generator {

using metrics::Sample;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// HTTP or response-format failure after retries are exhausted.
class TransportError : public conformal::SamplerError {
 public:
  using conformal::SamplerError::SamplerError;
};

// ---- prompts ---------------------------------------------------------------------

enum class IclVariant { kOneHop, kTwoPlusFour };
std::string_view variant_name(IclVariant v);
IclVariant variant_from_name(std::string_view name);  // throws ConfigError

struct PromptSpec {
  IclVariant variant = IclVariant::kTwoPlusFour;
  stepgame::Entry entry;
  std::string rendered;
  std::string id;  // "<entry id>:<variant>"
};

std::string_view prompt_asset(IclVariant v);
std::string instruction_block(const stepgame::Entry& entry);
PromptSpec build_prompt(const stepgame::Entry& entry, IclVariant v);

// FNV-1a 64 and byte length pinned for each prompt asset.
struct AssetPin {
  std::uint64_t fnv1a;
  std::size_t length;
};
AssetPin expected_pin(IclVariant v);
AssetPin actual_pin(IclVariant v);

// ---- error injection ---------------------------------------------------------------

enum class ErrorClass {
  kWrongArityFact,
  kRuleTypo,
  kGibberishTail,
  kNaturalLanguageOnly,
  kMissingAnswerFactError,
  kMultiAnswerRule,
  kWrongRelationFact,
  kCommaDisjunctionFact,
  kIncompleteTrailingLine,
};

inline constexpr std::array<ErrorClass, 9> kAllErrorClasses = {
    ErrorClass::kWrongArityFact,        ErrorClass::kRuleTypo,
    ErrorClass::kGibberishTail,         ErrorClass::kNaturalLanguageOnly,
    ErrorClass::kMissingAnswerFactError, ErrorClass::kMultiAnswerRule,
    ErrorClass::kWrongRelationFact,     ErrorClass::kCommaDisjunctionFact,
    ErrorClass::kIncompleteTrailingLine,
};

std::string_view error_class_name(ErrorClass c);
ErrorClass error_class_from_name(std::string_view name);  // throws ConfigError

// Outcome the corrupted program lands in once post-processed and solved.
asp::OutcomeKind expected_outcome(ErrorClass c);
// True for classes whose post-processed output fails the syntax check.
bool syntax_invalid(ErrorClass c);

// Applies the class transform to a gold program. The program's edge and query
// facts drive the choice of which line to corrupt.
std::string inject_error(const std::string& gold_text, ErrorClass c, std::uint64_t seed);

// ---- generator specs ------------------------------------------------------------

inline const std::vector<std::string>& default_stop_tokens() {
  static const std::vector<std::string> kStops = {"### Instruction", "```"};
  return kStops;
}

struct EndpointSettings {
  std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "llama3.1-8b-instruct";
  double temperature = 0.7;
  int max_tokens = 1024;
  std::vector<std::string> stop = default_stop_tokens();
  std::string api_key_env = "CLMASP_API_KEY";
  double timeout_seconds = 60.0;
  int retries = 3;
  int max_in_flight = 4;
};

struct SyntheticSettings {
  double clean = 0.5;
  std::map<ErrorClass, double> errors;  // sums with `clean` to 1
  double clean_mean = -0.3;
  double corrupted_mean = -1.2;
  double sample_sd = 0.1;
  // When set, each entry draws an admissibility level a from [lo, hi]; the
  // syntax-invalid classes share mass 1 - a and the rest share a.
  std::optional<std::pair<double, double>> admissibility_range;
  bool shuffle_facts = true;

  static SyntheticSettings with_default_mix(double clean = 0.5);
  void validate() const;  // throws ConfigError
};

enum class GeneratorKind { kEndpoint, kReplay, kSynthetic };
std::string_view kind_name(GeneratorKind k);
GeneratorKind kind_from_name(std::string_view name);  // throws ConfigError

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kSynthetic;
  EndpointSettings endpoint;
  std::string replay_path;
  SyntheticSettings synthetic = SyntheticSettings::with_default_mix();
  std::vector<std::string> stop_tokens = default_stop_tokens();
};

// raw text + logprobs -> Sample with post-processed text and syntax admission.
Sample finish_sample(std::string raw, std::vector<double> logprobs, std::string origin,
                     const std::vector<std::string>& stop_tokens);

// ---- samplers ----------------------------------------------------------------------

class Sampler {
 public:
  virtual ~Sampler() = default;
  // Draw number `index` for this prompt under `seed`.
  virtual Sample draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) = 0;
  // One greedy sample.
  virtual Sample baseline(const PromptSpec& prompt) = 0;
};

class SyntheticSampler : public Sampler {
 public:
  SyntheticSampler(SyntheticSettings settings, std::vector<std::string> stop_tokens,
                   std::uint64_t seed = 0);
  Sample draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) override;
  Sample baseline(const PromptSpec& prompt) override;

  // Class drawn for (prompt, seed, index); nullopt means clean.
  std::optional<ErrorClass> draw_class(const PromptSpec& prompt, std::uint64_t seed,
                                       std::size_t index) const;
  Sample make_sample(const PromptSpec& prompt, std::optional<ErrorClass> c,
                     std::uint64_t seed) const;

 private:
  SyntheticSettings settings_;
  std::vector<std::string> stop_;
  std::uint64_t seed_;
};

struct ReplayLine {
  std::string prompt_id;
  std::size_t index = 0;
  std::string raw_text;
  std::vector<double> token_logprobs;
  std::string origin;
};

std::string replay_to_json(const ReplayLine& line);
ReplayLine replay_from_json(const std::string& line);

class ReplaySampler : public Sampler {
 public:
  ReplaySampler(const std::string& path, std::vector<std::string> stop_tokens);
  ReplaySampler(std::vector<ReplayLine> lines, std::vector<std::string> stop_tokens);
  Sample draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) override;
  Sample baseline(const PromptSpec& prompt) override;
  std::size_t prompt_count() const { return by_prompt_.size(); }

 private:
  std::map<std::string, std::vector<ReplayLine>> by_prompt_;
  std::vector<std::string> stop_;
};

// Forwards to another sampler and appends every draw to a replay file.
class RecordingSampler : public Sampler {
 public:
  RecordingSampler(std::shared_ptr<Sampler> inner, const std::string& path);
  Sample draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) override;
  Sample baseline(const PromptSpec& prompt) override;

 private:
  std::shared_ptr<Sampler> inner_;
  std::string path_;
  std::mutex mu_;
};

struct EndpointRequest {
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 1024;
  std::vector<std::string> stop;
  std::optional<std::uint64_t> seed;
};

std::string request_body(const EndpointSettings& s, const EndpointRequest& r);
// Extracts (text, token logprobs) from a chat or legacy completions response.
// Missing logprobs yield an empty vector. Throws TransportError on bad JSON.
std::pair<std::string, std::vector<double>> parse_response(const std::string& body);

class EndpointSampler : public Sampler {
 public:
  explicit EndpointSampler(EndpointSettings settings, std::vector<std::string> stop_tokens = {});
  Sample draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) override;
  Sample baseline(const PromptSpec& prompt) override;
  std::size_t placeholder_count() const { return placeholders_.load(); }

 private:
  Sample request(const PromptSpec& prompt, double temperature, std::optional<std::uint64_t> seed);

  EndpointSettings settings_;
  std::vector<std::string> stop_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> placeholders_{0};
};

// Judge scorer backed by a completions endpoint that echoes prompt logprobs.
class HttpJudgeScorer : public metrics::JudgeScorer {
 public:
  explicit HttpJudgeScorer(EndpointSettings settings);
  std::vector<double> score(std::string_view text) override;

 private:
  EndpointSettings settings_;
};

std::shared_ptr<Sampler> make_sampler(const GeneratorSpec& spec, std::uint64_t seed = 0);

// Free-function wrappers.
Sample draw(Sampler& sampler, const PromptSpec& prompt, std::uint64_t seed, std::size_t index = 0);
Sample baseline_sample(Sampler& sampler, const PromptSpec& prompt);

}  // namespace clmasp::generator
