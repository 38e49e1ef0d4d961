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
#include <fstream>
#include <string>

#include <json.hpp>

#include "clmasp/asp/parser.hpp"
#include "clmasp/generator.hpp"
#include "clmasp/random.hpp"

namespace clmasp::generator {

namespace {

std::size_t whitespace_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in = false;
  for (char c : text) {
    bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in) ++n;
    in = !ws;
  }
  return n;
}

std::string shuffled_gold(const stepgame::Entry& e, Rng& rng, bool shuffle) {
  std::vector<stepgame::Edge> edges = e.edges;
  if (shuffle) rng.shuffle(edges);
  std::string out;
  for (const auto& edge : edges) out += stepgame::fact_for(edge) + "\n\n";
  out += stepgame::query_fact(e.query) + "\n\n";
  out += stepgame::rule_block();
  out += "\n";
  return out;
}

}  // namespace

std::string_view kind_name(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::kEndpoint: return "endpoint";
    case GeneratorKind::kReplay: return "replay";
    case GeneratorKind::kSynthetic: return "synthetic";
  }
  return "?";
}

GeneratorKind kind_from_name(std::string_view name) {
  if (name == "endpoint") return GeneratorKind::kEndpoint;
  if (name == "replay") return GeneratorKind::kReplay;
  if (name == "synthetic") return GeneratorKind::kSynthetic;
  throw ConfigError("unknown generator kind: " + std::string(name));
}

SyntheticSettings SyntheticSettings::with_default_mix(double clean) {
  static const std::map<ErrorClass, double> kWeights = {
      {ErrorClass::kWrongArityFact, 0.20},        {ErrorClass::kRuleTypo, 0.10},
      {ErrorClass::kGibberishTail, 0.15},         {ErrorClass::kNaturalLanguageOnly, 0.10},
      {ErrorClass::kIncompleteTrailingLine, 0.10}, {ErrorClass::kMissingAnswerFactError, 0.12},
      {ErrorClass::kMultiAnswerRule, 0.08},       {ErrorClass::kWrongRelationFact, 0.08},
      {ErrorClass::kCommaDisjunctionFact, 0.07},
  };
  SyntheticSettings s;
  s.clean = clean;
  for (const auto& [c, w] : kWeights) s.errors[c] = w * (1.0 - clean);
  return s;
}

void SyntheticSettings::validate() const {
  double total = clean;
  if (clean < 0.0) throw ConfigError("synthetic clean probability must be >= 0");
  for (const auto& [c, w] : errors) {
    if (w < 0.0) throw ConfigError("synthetic error probability must be >= 0");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("synthetic probabilities must sum to 1");
  if (!(sample_sd >= 0.0)) throw ConfigError("synthetic sample_sd must be >= 0");
  if (!(clean_mean < 0.0) || !(corrupted_mean < 0.0)) {
    throw ConfigError("synthetic logprob means must be negative");
  }
  if (admissibility_range) {
    auto [lo, hi] = *admissibility_range;
    if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
      throw ConfigError("admissibility range must satisfy 0 <= lo <= hi <= 1");
    }
  }
}

Sample finish_sample(std::string raw, std::vector<double> logprobs, std::string origin,
                     const std::vector<std::string>& stop_tokens) {
  Sample s;
  s.text = asp::post_process(raw, stop_tokens);
  s.admissible = asp::check_syntax(s.text);
  s.raw_text = std::move(raw);
  s.token_logprobs = std::move(logprobs);
  s.origin = std::move(origin);
  return s;
}

// ---- synthetic --------------------------------------------------------------------

SyntheticSampler::SyntheticSampler(SyntheticSettings settings, std::vector<std::string> stop_tokens,
                                   std::uint64_t seed)
    : settings_(std::move(settings)), stop_(std::move(stop_tokens)), seed_(seed) {
  settings_.validate();
}

std::optional<ErrorClass> SyntheticSampler::draw_class(const PromptSpec& prompt,
                                                       std::uint64_t seed,
                                                       std::size_t index) const {
  const std::uint64_t id = hash_string(prompt.entry.id);
  std::vector<std::pair<std::optional<ErrorClass>, double>> weights;
  weights.emplace_back(std::nullopt, settings_.clean);
  for (const auto& [c, w] : settings_.errors) weights.emplace_back(c, w);

  if (settings_.admissibility_range) {
    auto [lo, hi] = *settings_.admissibility_range;
    Rng entry_rng(derive_seed(seed_, {seed, id, 0xad}));
    double a = entry_rng.uniform(lo, hi);
    double valid = 0.0, invalid = 0.0;
    for (const auto& [c, w] : weights) (c && syntax_invalid(*c) ? invalid : valid) += w;
    for (auto& [c, w] : weights) {
      bool bad = c && syntax_invalid(*c);
      double mass = bad ? invalid : valid;
      w = mass > 0.0 ? w / mass * (bad ? 1.0 - a : a) : 0.0;
    }
  }

  Rng rng(derive_seed(seed_, {seed, id, index, 0xc1}));
  double total = 0.0;
  for (const auto& [c, w] : weights) total += w;
  double u = rng.uniform() * total;
  for (const auto& [c, w] : weights) {
    if (u < w) return c;
    u -= w;
  }
  for (auto it = weights.rbegin(); it != weights.rend(); ++it) {
    if (it->second > 0.0) return it->first;
  }
  return std::nullopt;
}

Sample SyntheticSampler::make_sample(const PromptSpec& prompt, std::optional<ErrorClass> c,
                                     std::uint64_t seed) const {
  Rng rng(seed);
  std::string raw = shuffled_gold(prompt.entry, rng, settings_.shuffle_facts);
  if (c) raw = inject_error(raw, *c, rng.next());
  double mean = (c ? settings_.corrupted_mean : settings_.clean_mean) +
                rng.normal(0.0, settings_.sample_sd);
  mean = std::min(mean, -1e-3);
  std::size_t tokens = std::max<std::size_t>(1, whitespace_tokens(raw));
  std::vector<double> lp(tokens);
  for (auto& x : lp) x = -rng.exponential(-mean);
  std::string origin = c ? std::string(error_class_name(*c)) : "clean";
  return finish_sample(std::move(raw), std::move(lp), std::move(origin), stop_);
}

Sample SyntheticSampler::draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) {
  auto c = draw_class(prompt, seed, index);
  return make_sample(prompt, c,
                     derive_seed(seed_, {seed, hash_string(prompt.entry.id), index, 0x5a}));
}

Sample SyntheticSampler::baseline(const PromptSpec& prompt) {
  constexpr std::uint64_t kGreedy = 0x6eed;
  auto c = draw_class(prompt, kGreedy, 0);
  return make_sample(prompt, c, derive_seed(seed_, {kGreedy, hash_string(prompt.entry.id)}));
}

// ---- replay -----------------------------------------------------------------------

std::string replay_to_json(const ReplayLine& line) {
  nlohmann::json j;
  j["prompt_id"] = line.prompt_id;
  j["index"] = line.index;
  j["raw_text"] = line.raw_text;
  j["token_logprobs"] = line.token_logprobs;
  j["origin"] = line.origin;
  return j.dump();
}

ReplayLine replay_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    ReplayLine l;
    l.prompt_id = j.at("prompt_id").get<std::string>();
    l.index = j.at("index").get<std::size_t>();
    l.raw_text = j.at("raw_text").get<std::string>();
    l.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
    l.origin = j.value("origin", std::string("replay"));
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad replay line: ") + e.what());
  }
}

ReplaySampler::ReplaySampler(std::vector<ReplayLine> lines, std::vector<std::string> stop_tokens)
    : stop_(std::move(stop_tokens)) {
  for (auto& l : lines) by_prompt_[l.prompt_id].push_back(std::move(l));
  for (auto& [id, v] : by_prompt_) {
    std::stable_sort(v.begin(), v.end(),
                     [](const ReplayLine& a, const ReplayLine& b) { return a.index < b.index; });
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].index != i) throw ConfigError("replay file has a gap in indices for " + id);
    }
  }
}

namespace {
std::vector<ReplayLine> load_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open replay file: " + path);
  std::vector<ReplayLine> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(replay_from_json(line));
  }
  return out;
}
}  // namespace

ReplaySampler::ReplaySampler(const std::string& path, std::vector<std::string> stop_tokens)
    : ReplaySampler(load_replay(path), std::move(stop_tokens)) {}

Sample ReplaySampler::draw(const PromptSpec& prompt, std::uint64_t, std::size_t index) {
  auto it = by_prompt_.find(prompt.id);
  if (it == by_prompt_.end() || index >= it->second.size()) {
    throw conformal::SamplerError("replay exhausted for " + prompt.id + " at draw " +
                                  std::to_string(index));
  }
  const auto& l = it->second[index];
  return finish_sample(l.raw_text, l.token_logprobs, l.origin, stop_);
}

Sample ReplaySampler::baseline(const PromptSpec& prompt) { return draw(prompt, 0, 0); }

RecordingSampler::RecordingSampler(std::shared_ptr<Sampler> inner, const std::string& path)
    : inner_(std::move(inner)), path_(path) {}

Sample RecordingSampler::draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) {
  Sample s = inner_->draw(prompt, seed, index);
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path_, std::ios::app);
  out << replay_to_json({prompt.id, index, s.raw_text, s.token_logprobs, s.origin}) << '\n';
  return s;
}

Sample RecordingSampler::baseline(const PromptSpec& prompt) { return inner_->baseline(prompt); }

// ---- factory ----------------------------------------------------------------------

std::shared_ptr<Sampler> make_sampler(const GeneratorSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case GeneratorKind::kSynthetic:
      return std::make_shared<SyntheticSampler>(spec.synthetic, spec.stop_tokens, seed);
    case GeneratorKind::kReplay:
      return std::make_shared<ReplaySampler>(spec.replay_path, spec.stop_tokens);
    case GeneratorKind::kEndpoint:
      return std::make_shared<EndpointSampler>(spec.endpoint, spec.stop_tokens);
  }
  throw ConfigError("unknown generator kind");
}

Sample draw(Sampler& sampler, const PromptSpec& prompt, std::uint64_t seed, std::size_t index) {
  return sampler.draw(prompt, seed, index);
}

Sample baseline_sample(Sampler& sampler, const PromptSpec& prompt) {
  return sampler.baseline(prompt);
}

}  // namespace clmasp::generator
