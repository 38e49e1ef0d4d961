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
#include <memory>
#include <string>
#include <vector>

#include "clmasp/metrics.hpp"
#include "clmasp/random.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clmasp;
using namespace clmasp::metrics;

namespace {

Sample with_logprobs(std::vector<double> lp, std::string text = "x") {
  Sample s;
  s.text = std::move(text);
  s.raw_text = s.text;
  s.token_logprobs = std::move(lp);
  return s;
}

class FixedScorer : public JudgeScorer {
 public:
  std::vector<double> score(std::string_view text) override {
    ++calls;
    if (text == "a") return {-1.0, -1.0};
    if (text == "b") return {-3.0, -4.0};
    if (text == "c") return {-2.0};
    throw std::runtime_error("unknown text");
  }
  int calls = 0;
};

}  // namespace

TEST_CASE("quality") {
  CHECK(quality(with_logprobs({0, 0, 0})) == doctest::Approx(1.0));
  CHECK(quality(with_logprobs({std::log(0.5), std::log(0.5)})) == doctest::Approx(0.5));
  CHECK(quality(with_logprobs({-1, -2, -3})) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(quality(with_logprobs({-1, -2, -3})) == doctest::Approx(0.1353).epsilon(1e-3));
  CHECK_THROWS_AS(quality(with_logprobs({})), MetricError);
}

TEST_CASE("confidence") {
  CHECK(confidence({with_logprobs({0})}) == doctest::Approx(1.0));
  CHECK(confidence({with_logprobs({-1, -1}), with_logprobs({-0.5, -0.5})}) ==
        doctest::Approx(std::exp(-1.0)));
  CHECK(confidence({}) == 0.0);
  Rng rng(3);
  std::vector<Sample> set;
  double prev = 0.0;
  for (int i = 0; i < 50; ++i) {
    set.push_back(with_logprobs({-rng.exponential(1.0), -rng.exponential(1.0)}));
    double c = confidence(set);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("rouge_l examples") {
  CHECK(rouge_l("the cat sat", "the cat sat") == 1.0);
  CHECK(rouge_l("a b c", "d e f") == 0.0);
  CHECK(rouge_l("the cat sat", "the sat") == doctest::Approx(0.8));
  CHECK(rouge_l("", "a") == 0.0);
  CHECK(rouge_l("a", "") == 0.0);
  CHECK(rouge_l("The  CAT\nsat", "the cat sat") == 1.0);
  CHECK(rouge_tokens(" A\tb  c \n") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("rouge_l agrees with brute force on all pairs up to length 5, 3 symbols") {
  oracle::ExhaustiveLcs all(5, 3);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      const auto& a = all.seq(i);
      const auto& b = all.seq(j);
      std::size_t lcs = all.lcs(i, j);
      REQUIRE(lcs_length(a, b) == lcs);
      REQUIRE(rouge_l(a, b) == oracle::rouge_from_lcs(lcs, a.size(), b.size()));
      ++checked;
    }
  }
  CHECK(checked == 364u * 364u);
}

TEST_CASE("exhaustive oracle agrees with subset enumeration and DP") {
  oracle::ExhaustiveLcs all(4, 3);
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      std::size_t lcs = all.lcs(i, j);
      REQUIRE(oracle::brute_force_lcs(all.seq(i), all.seq(j)) == lcs);
      REQUIRE(oracle::dp_lcs(all.seq(i), all.seq(j)) == lcs);
    }
  }
}

TEST_CASE("rouge_l multi-word path matches DP on long sequences") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t la = rng.index(400);
    std::size_t lb = rng.index(400);
    std::uint32_t alpha = 2 + static_cast<std::uint32_t>(rng.index(30));
    std::vector<std::uint32_t> a(la), b(lb);
    for (auto& x : a) x = static_cast<std::uint32_t>(rng.index(alpha));
    for (auto& x : b) x = static_cast<std::uint32_t>(rng.index(alpha));
    std::size_t expected = oracle::dp_lcs(a, b);
    REQUIRE(lcs_length(a, b) == expected);
    REQUIRE(lcs_length(b, a) == expected);
    double r = rouge_l(a, b);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    CHECK(r == rouge_l(b, a));
  }
}

TEST_CASE("judge_score") {
  FixedScorer scorer;
  Sample a = with_logprobs({0}, "a");
  Sample b = with_logprobs({0}, "b");
  Sample c = with_logprobs({0}, "c");
  CHECK(judge_score(a, a, scorer) == 0.0);
  CHECK(judge_score(a, b, scorer) == doctest::Approx(2.5));
  CHECK(judge_score(b, a, scorer) == judge_score(a, b, scorer));
  CHECK(judge_score(a, c, scorer) <= judge_score(a, b, scorer) + judge_score(b, c, scorer));
  Sample bad = with_logprobs({0}, "zzz");
  CHECK_THROWS_AS(judge_score(a, bad, scorer), MetricError);
}

TEST_CASE("judge scorers: stub determinism, caching, symmetry") {
  auto stub = std::make_shared<StubScorer>();
  CHECK(stub->score("left(\"X\", \"K\").") == stub->score("left(\"X\", \"K\")."));
  for (double v : stub->score("a b c d")) CHECK(v <= 0.0);

  auto counting = std::make_shared<FixedScorer>();
  CachingScorer cache(counting);
  cache.score("a");
  cache.score("a");
  cache.score("b");
  CHECK(counting->calls == 2);
  CHECK(cache.cache_size() == 2);

  Rng rng(4);
  std::vector<Sample> samples;
  for (int i = 0; i < 12; ++i) {
    std::string t;
    for (int k = 0; k < 6; ++k) t += "w" + std::to_string(rng.index(5)) + " ";
    samples.push_back(with_logprobs({0}, t));
  }
  for (const auto& x : samples) {
    for (const auto& y : samples) {
      double d = judge_score(x, y, *stub);
      CHECK(d >= 0.0);
      CHECK(d == judge_score(y, x, *stub));
      for (const auto& z : samples) {
        CHECK(judge_score(x, z, *stub) <= d + judge_score(y, z, *stub) + 1e-12);
      }
    }
  }
}

TEST_CASE("metric bundles") {
  MetricBundle r = rouge_bundle();
  CHECK(r.self_similarity() == 1.0);
  Sample x = with_logprobs({-0.1}, "p(a). q(b).");
  CHECK(r.diversity(x, x) == 1.0);
  CHECK(r.diversity_passes(0.4, 0.5));
  CHECK_FALSE(r.diversity_passes(0.6, 0.5));

  MetricBundle j = judge_bundle(std::make_shared<StubScorer>(), 2.0);
  CHECK(j.self_similarity() == 0.0);
  CHECK(j.diversity(x, x) == 0.0);
  CHECK(j.diversity_passes(1.0, 0.5));
  CHECK_FALSE(j.diversity_passes(0.9, 0.5));
  CHECK(diversity_from_name("llm_judge") == DiversityKind::kLlmJudge);
  CHECK(diversity_name(DiversityKind::kRougeL) == "rouge_l");
  CHECK_THROWS_AS(diversity_from_name("bleu"), MetricError);
}
