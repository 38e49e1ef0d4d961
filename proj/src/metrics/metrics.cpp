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

#include "clmasp/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <numeric>

#include "clmasp/random.hpp"

namespace clmasp::metrics {

double sequence_logprob(const Sample& s) {
  return std::accumulate(s.token_logprobs.begin(), s.token_logprobs.end(), 0.0);
}

double quality(const Sample& s) {
  if (s.token_logprobs.empty()) throw MetricError("quality: sample has no token logprobs");
  return std::exp(sequence_logprob(s) / static_cast<double>(s.token_logprobs.size()));
}

double confidence(const std::vector<Sample>& set) {
  double best = 0.0;
  for (const auto& s : set) best = std::max(best, std::exp(sequence_logprob(s)));
  return best;
}

// ---- ROUGE-L ---------------------------------------------------------------

std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::uint32_t> TokenInterner::ids(std::string_view text) {
  std::vector<std::uint32_t> out;
  for (auto& tok : rouge_tokens(text)) {
    auto [it, inserted] = table_.try_emplace(std::move(tok), static_cast<std::uint32_t>(table_.size()));
    out.push_back(it->second);
  }
  return out;
}

// Bit-parallel LCS (Allison-Dix / Hyyrö): one bit per position of the
// shorter sequence, one multi-word add per symbol of the longer one.
std::size_t lcs_length(const std::vector<std::uint32_t>& a_in,
                       const std::vector<std::uint32_t>& b_in) {
  const auto& a = a_in.size() <= b_in.size() ? a_in : b_in;
  const auto& b = a_in.size() <= b_in.size() ? b_in : a_in;
  const std::size_t m = a.size();
  if (m == 0) return 0;
  if (m <= 64) {
    std::uint32_t syms[64];
    std::uint64_t masks[64];
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t k = 0;
      while (k < distinct && syms[k] != a[i]) ++k;
      if (k == distinct) {
        syms[distinct] = a[i];
        masks[distinct++] = 0;
      }
      masks[k] |= std::uint64_t{1} << i;
    }
    std::uint64_t v = ~std::uint64_t{0};
    for (std::uint32_t sym : b) {
      std::size_t k = 0;
      while (k < distinct && syms[k] != sym) ++k;
      if (k == distinct) continue;
      v = (v + (v & masks[k])) | (v & ~masks[k]);
    }
    std::uint64_t low = m == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
    return m - static_cast<std::size_t>(std::popcount(v & low));
  }
  const std::size_t words = (m + 63) / 64;

  std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> match;
  for (std::size_t i = 0; i < m; ++i) {
    auto& bits = match[a[i]];
    if (bits.empty()) bits.assign(words, 0);
    bits[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  std::vector<std::uint64_t> v(words, ~std::uint64_t{0});
  for (std::uint32_t sym : b) {
    auto it = match.find(sym);
    if (it == match.end()) continue;
    const auto& pm = it->second;
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t u = v[w] & pm[w];
      std::uint64_t sum = v[w] + u;
      std::uint64_t c1 = sum < v[w];
      std::uint64_t sum2 = sum + carry;
      std::uint64_t c2 = sum2 < sum;
      v[w] = sum2 | (v[w] & ~pm[w]);
      carry = c1 | c2;
    }
  }
  std::size_t ones = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t word = v[w];
    if (w == words - 1 && m % 64 != 0) word &= (std::uint64_t{1} << (m % 64)) - 1;
    ones += static_cast<std::size_t>(std::popcount(word));
  }
  return m - ones;
}

double rouge_l(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.empty() || b.empty()) return 0.0;
  double lcs = static_cast<double>(lcs_length(a, b));
  if (lcs == 0.0) return 0.0;
  double p = lcs / static_cast<double>(a.size());
  double r = lcs / static_cast<double>(b.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::unordered_map<std::string, std::uint32_t> table;
  auto ids = [&](const std::vector<std::string>& toks) {
    std::vector<std::uint32_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) {
      out.push_back(table.try_emplace(t, static_cast<std::uint32_t>(table.size())).first->second);
    }
    return out;
  };
  auto ia = ids(a);
  auto ib = ids(b);
  return rouge_l(ia, ib);
}

double rouge_l(std::string_view a, std::string_view b) {
  TokenInterner interner;
  auto ia = interner.ids(a);
  auto ib = interner.ids(b);
  return rouge_l(ia, ib);
}

// ---- judge -------------------------------------------------------------------

std::vector<double> StubScorer::score(std::string_view text) {
  std::vector<double> out;
  for (const auto& tok : rouge_tokens(text)) {
    out.push_back(-static_cast<double>(hash_string(tok) % 4000) / 1000.0);
  }
  if (out.empty()) out.push_back(0.0);
  return out;
}

std::vector<double> CachingScorer::score(std::string_view text) {
  std::string key(text);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  std::vector<double> result = inner_->score(text);
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.try_emplace(std::move(key), std::move(result)).first->second;
}

std::size_t CachingScorer::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

double mean_judge_logprob(std::string_view text, JudgeScorer& scorer) {
  std::vector<double> lp;
  try {
    lp = scorer.score(text);
  } catch (const std::exception& e) {
    throw MetricError(std::string("judge scorer failed: ") + e.what());
  }
  if (lp.empty()) throw MetricError("judge scorer returned no logprobs");
  return std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size());
}

double judge_score(const Sample& a, const Sample& b, JudgeScorer& scorer) {
  if (a.text == b.text) return 0.0;
  return std::fabs(mean_judge_logprob(a.text, scorer) - mean_judge_logprob(b.text, scorer));
}

// ---- bundles -----------------------------------------------------------------

std::string_view diversity_name(DiversityKind k) {
  return k == DiversityKind::kRougeL ? "rouge_l" : "llm_judge";
}

DiversityKind diversity_from_name(std::string_view name) {
  if (name == "rouge_l") return DiversityKind::kRougeL;
  if (name == "llm_judge") return DiversityKind::kLlmJudge;
  throw MetricError("unknown diversity metric: " + std::string(name));
}

bool MetricBundle::diversity_passes(double d, double lambda2) const {
  if (diversity_kind == DiversityKind::kRougeL) return d <= lambda2;
  return d >= lambda2 * judge_scale;
}

double MetricBundle::self_similarity() const {
  return diversity_kind == DiversityKind::kRougeL ? 1.0 : 0.0;
}

MetricBundle rouge_bundle() {
  MetricBundle b;
  b.diversity_kind = DiversityKind::kRougeL;
  b.quality = [](const Sample& s) { return quality(s); };
  b.diversity = [](const Sample& x, const Sample& y) { return rouge_l(x.text, y.text); };
  b.confidence = [](const std::vector<Sample>& set) { return confidence(set); };
  return b;
}

MetricBundle judge_bundle(std::shared_ptr<JudgeScorer> scorer, double judge_scale) {
  MetricBundle b;
  b.diversity_kind = DiversityKind::kLlmJudge;
  b.judge_scale = judge_scale;
  b.quality = [](const Sample& s) { return quality(s); };
  b.diversity = [scorer](const Sample& x, const Sample& y) { return judge_score(x, y, *scorer); };
  b.confidence = [](const std::vector<Sample>& set) { return confidence(set); };
  return b;
}

}  // namespace clmasp::metrics
