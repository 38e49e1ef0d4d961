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

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "clmasp/asp/parser.hpp"
#include "clmasp/generator.hpp"
#include "clmasp/random.hpp"
#include "doctest.h"

using namespace clmasp;
using namespace clmasp::generator;

namespace {

asp::OutcomeKind solve(const Sample& s, const stepgame::Entry& e) {
  return asp::evaluate_program(s.text, stepgame::name(e.gold_answer)).kind;
}

// Local HTTP fixture on an ephemeral port.
class Server {
 public:
  Server() {
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~Server() {
    svr_.stop();
    thread_.join();
  }
  httplib::Server& svr() { return svr_; }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_response(const std::string& text, bool with_logprobs) {
  nlohmann::json choice;
  choice["message"] = {{"role", "assistant"}, {"content", text}};
  if (with_logprobs) {
    nlohmann::json content = nlohmann::json::array();
    for (double v : {-0.1, -0.2, -0.3}) content.push_back({{"token", "t"}, {"logprob", v}});
    choice["logprobs"] = {{"content", content}};
  }
  return nlohmann::json{{"choices", {choice}}}.dump();
}

stepgame::Entry sample_entry(int hops, std::uint64_t seed) {
  return stepgame::generate_entry(hops, seed);
}

}  // namespace

TEST_CASE("prompt assets are pinned") {
  for (IclVariant v : {IclVariant::kOneHop, IclVariant::kTwoPlusFour}) {
    CHECK(actual_pin(v).fnv1a == expected_pin(v).fnv1a);
    CHECK(actual_pin(v).length == expected_pin(v).length);
  }
}

TEST_CASE("build_prompt") {
  auto e = sample_entry(3, 1);
  auto one = build_prompt(e, IclVariant::kOneHop);
  auto two = build_prompt(e, IclVariant::kTwoPlusFour);
  CHECK(one.rendered.find("X is to the left of K") != std::string::npos);
  CHECK(two.rendered.find("C and M are both there") != std::string::npos);
  CHECK(one.rendered.rfind(prompt_asset(IclVariant::kOneHop), 0) == 0);
  CHECK(two.rendered.size() > instruction_block(e).size());
  CHECK(two.rendered.substr(two.rendered.size() - instruction_block(e).size()) == instruction_block(e));
  CHECK(build_prompt(e, IclVariant::kOneHop).rendered == one.rendered);
  CHECK(one.id == e.id + ":one_hop");
  CHECK(variant_from_name("two_plus_four") == IclVariant::kTwoPlusFour);
  CHECK_THROWS_AS(variant_from_name("three_hop"), ConfigError);
}

TEST_CASE("instruction block reproduces the exemplar format") {
  stepgame::Entry e;
  e.story = {"F and T are next to each other with F on the left and T on the right.",
             "U and F are parallel, and U is on top of F."};
  e.query = {"U", "F"};
  std::string asset(prompt_asset(IclVariant::kTwoPlusFour));
  std::string start = "Example 1:\n### Instruction:\n";
  std::size_t a = asset.find(start) + start.size();
  std::size_t b = asset.find("### Response:\n", a) + std::string("### Response:\n").size();
  // The exemplar is hard-wrapped; compare modulo whitespace.
  std::string exemplar = asset.substr(a, b - a);
  std::string block = instruction_block(e);
  std::string flat_block = std::regex_replace(block, std::regex("\n"), " ");
  std::string flat_exemplar = std::regex_replace(exemplar, std::regex("\n"), " ");
  flat_block = std::regex_replace(flat_block, std::regex(" +"), " ");
  flat_exemplar = std::regex_replace(flat_exemplar, std::regex(" +"), " ");
  CHECK(flat_block == flat_exemplar);
  CHECK(block.find("\n2 U and F are parallel") != std::string::npos);
  CHECK(block.find("\n3 What is the relation of the agent U to the agent F? \n\n### Response:\n") !=
        std::string::npos);
}

TEST_CASE("every injection lands in its intended outcome") {
  Rng rng(2024);
  std::map<ErrorClass, int> counts;
  for (int trial = 0; trial < 1000; ++trial) {
    int hops = 1 + static_cast<int>(rng.index(24));
    auto e = sample_entry(hops, rng.next());
    ErrorClass c = kAllErrorClasses[rng.index(kAllErrorClasses.size())];
    std::string raw = inject_error(stepgame::gold_program(e), c, rng.next());
    Sample s = finish_sample(raw, {-0.5}, std::string(error_class_name(c)), default_stop_tokens());
    INFO("class " << error_class_name(c) << " hops " << hops << "\n" << raw);
    REQUIRE(s.admissible == (syntax_invalid(c) ? 0 : 1));
    REQUIRE(solve(s, e) == expected_outcome(c));
    if (c == ErrorClass::kIncompleteTrailingLine) REQUIRE(asp::check_syntax(raw) == 0);
    ++counts[c];
  }
  CHECK(counts.size() == kAllErrorClasses.size());
}

TEST_CASE("injection transforms have the documented shape") {
  stepgame::Entry e;
  e.id = "literal";
  e.edges = {{"U", "N", stepgame::Relation::kTopRight}};
  e.query = {"U", "N"};
  e.gold_answer = stepgame::Relation::kTopRight;
  e.gold_facts = {stepgame::fact_for(e.edges[0]), stepgame::query_fact(e.query)};
  std::string gold = stepgame::gold_program(e);

  std::string wrong = inject_error(gold, ErrorClass::kWrongRelationFact, 1);
  CHECK((wrong.find("top(\"U\", \"N\").") != std::string::npos ||
         wrong.find("right(\"U\", \"N\").") != std::string::npos));
  CHECK(wrong.find("top_right(\"U\", \"N\").") == std::string::npos);

  std::string comma = inject_error(gold, ErrorClass::kCommaDisjunctionFact, 2);
  CHECK(std::regex_search(comma, std::regex(R"(top_right\("U", "N"\), \w+\("U", "N"\)\.)")));

  std::string multi = inject_error(gold, ErrorClass::kMultiAnswerRule, 3);
  CHECK(std::regex_search(multi, std::regex(R"(is\(A, top_right, B\) :- top_right\(A, B\)\.\nis\(A, \w+, B\) :- top_right\(A, B\)\.)")));

  std::string arity = inject_error(gold, ErrorClass::kWrongArityFact, 4);
  CHECK(std::regex_search(arity, std::regex(R"(at\("U", "N", \d\)\.)")));

  std::string prose = inject_error(gold, ErrorClass::kNaturalLanguageOnly, 5);
  CHECK(asp::check_syntax(prose) == 0);
  CHECK(prose.find("upper right") != std::string::npos);

  CHECK(inject_error(gold, ErrorClass::kRuleTypo, 6) == inject_error(gold, ErrorClass::kRuleTypo, 6));
  for (ErrorClass c : kAllErrorClasses) CHECK(error_class_from_name(error_class_name(c)) == c);
  CHECK_THROWS_AS(error_class_from_name("Typo"), ConfigError);
  CHECK_THROWS_AS(inject_error("p.", ErrorClass::kRuleTypo, 1), ConfigError);
}

TEST_CASE("synthetic sampler") {
  auto e = sample_entry(4, 77);
  auto prompt = build_prompt(e, IclVariant::kTwoPlusFour);

  SyntheticSampler clean(SyntheticSettings::with_default_mix(1.0), default_stop_tokens(), 1);
  for (std::size_t i = 0; i < 5; ++i) {
    Sample s = clean.draw(prompt, 9, i);
    CHECK(s.origin == "clean");
    CHECK(s.admissible == 1);
    CHECK(solve(s, e) == asp::OutcomeKind::kSingleCorrect);
    CHECK(s.token_logprobs.size() == metrics::rouge_tokens(s.raw_text).size());
  }
  CHECK(clean.draw(prompt, 9, 2) == clean.draw(prompt, 9, 2));
  CHECK(clean.baseline(prompt) == clean.baseline(prompt));

  SyntheticSettings forced;
  forced.clean = 0.0;
  forced.errors = {{ErrorClass::kWrongRelationFact, 1.0}};
  SyntheticSampler wrong(forced, default_stop_tokens(), 1);
  Sample w = wrong.draw(prompt, 1, 0);
  CHECK(w.origin == "WrongRelationFact");
  CHECK(solve(w, e) == asp::OutcomeKind::kSingleWrong);

  forced.errors = {{ErrorClass::kCommaDisjunctionFact, 1.0}};
  SyntheticSampler comma(forced, default_stop_tokens(), 1);
  CHECK(solve(comma.draw(prompt, 1, 0), e) == asp::OutcomeKind::kMultipleAnswerSets);

  SyntheticSettings bad = SyntheticSettings::with_default_mix(0.5);
  bad.clean = 0.9;
  CHECK_THROWS_AS(SyntheticSampler(bad, {}, 0), ConfigError);
}

TEST_CASE("synthetic quality separates clean from corrupted samples") {
  SyntheticSampler sampler(SyntheticSettings::with_default_mix(0.5), default_stop_tokens(), 3);
  double clean_sum = 0, bad_sum = 0;
  int clean_n = 0, bad_n = 0;
  for (int i = 0; i < 60; ++i) {
    auto prompt = build_prompt(sample_entry(1 + i % 5, i), IclVariant::kOneHop);
    for (std::size_t k = 0; k < 5; ++k) {
      Sample s = sampler.draw(prompt, 0, k);
      double q = metrics::quality(s);
      if (s.origin == "clean") {
        clean_sum += q;
        ++clean_n;
      } else {
        bad_sum += q;
        ++bad_n;
      }
    }
  }
  REQUIRE(clean_n > 0);
  REQUIRE(bad_n > 0);
  CHECK(clean_sum / clean_n == doctest::Approx(std::exp(-0.3)).epsilon(0.05));
  CHECK(bad_sum / bad_n == doctest::Approx(std::exp(-1.2)).epsilon(0.1));
}

TEST_CASE("per-entry admissibility range") {
  SyntheticSettings s = SyntheticSettings::with_default_mix(0.5);
  s.admissibility_range = std::make_pair(0.3, 0.95);
  SyntheticSampler sampler(s, default_stop_tokens(), 5);
  int admissible = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    auto prompt = build_prompt(sample_entry(1 + i % 3, 100 + i), IclVariant::kOneHop);
    for (std::size_t k = 0; k < 20; ++k) {
      auto c = sampler.draw_class(prompt, 0, k);
      admissible += !(c && syntax_invalid(*c));
      ++total;
    }
  }
  CHECK(static_cast<double>(admissible) / total == doctest::Approx(0.625).epsilon(0.05));

  s.admissibility_range = std::make_pair(0.0, 0.0);
  SyntheticSampler none(s, default_stop_tokens(), 5);
  auto prompt = build_prompt(sample_entry(2, 3), IclVariant::kOneHop);
  for (std::size_t k = 0; k < 50; ++k) CHECK(none.draw(prompt, 0, k).admissible == 0);
}

TEST_CASE("replay returns byte-identical samples") {
  auto path = std::filesystem::temp_directory_path() / "clmasp_replay_test.jsonl";
  std::filesystem::remove(path);
  auto inner = std::make_shared<SyntheticSampler>(SyntheticSettings::with_default_mix(0.4),
                                                  default_stop_tokens(), 8);
  RecordingSampler rec(inner, path.string());
  std::vector<PromptSpec> prompts;
  std::vector<Sample> drawn;
  for (int i = 0; i < 5; ++i) {
    prompts.push_back(build_prompt(sample_entry(2 + i, 40 + i), IclVariant::kTwoPlusFour));
    for (std::size_t k = 0; k < 4; ++k) drawn.push_back(rec.draw(prompts.back(), 3, k));
  }
  for (int run = 0; run < 2; ++run) {
    ReplaySampler replay(path.string(), default_stop_tokens());
    CHECK(replay.prompt_count() == 5);
    std::size_t at = 0;
    for (const auto& p : prompts) {
      for (std::size_t k = 0; k < 4; ++k) CHECK(replay.draw(p, 999, k) == drawn[at++]);
      CHECK_THROWS_AS(replay.draw(p, 0, 4), conformal::SamplerError);
      CHECK(replay.baseline(p) == replay.draw(p, 0, 0));
    }
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(ReplaySampler("/nonexistent/replay.jsonl", {}), ConfigError);
}

TEST_CASE("endpoint client against a local server") {
  Server server;
  std::vector<nlohmann::json> requests;
  std::mutex mu;
  std::atomic<int> failures_left{0};
  std::atomic<bool> with_logprobs{true};
  server.svr().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mu);
      requests.push_back(nlohmann::json::parse(req.body));
    }
    if (failures_left.fetch_sub(1) > 0) {
      res.status = 503;
      return;
    }
    res.set_content(chat_response("left(\"A\", \"B\").\n\nquery(\"A\", \"B\").", with_logprobs),
                    "application/json");
  });

  EndpointSettings s;
  s.url = server.url("/v1/chat/completions");
  s.retries = 2;
  s.timeout_seconds = 2.0;
  EndpointSampler sampler(s);
  auto prompt = build_prompt(sample_entry(1, 5), IclVariant::kOneHop);

  Sample x = sampler.draw(prompt, 1, 0);
  CHECK(x.token_logprobs == std::vector<double>{-0.1, -0.2, -0.3});
  CHECK(x.admissible == 1);
  CHECK(x.origin == "endpoint");
  REQUIRE(requests.size() == 1);
  CHECK(requests[0]["temperature"] == 0.7);
  CHECK(requests[0]["logprobs"] == true);
  CHECK(requests[0]["max_tokens"] == 1024);
  CHECK(requests[0]["stop"] == nlohmann::json(default_stop_tokens()));
  CHECK(requests[0]["messages"][0]["content"] == prompt.rendered);

  sampler.baseline(prompt);
  CHECK(requests.back()["temperature"] == 0.0);
  CHECK_FALSE(requests.back().contains("seed"));

  failures_left = 2;
  requests.clear();
  CHECK_NOTHROW(sampler.draw(prompt, 1, 1));
  CHECK(requests.size() == 3);

  failures_left = 100;
  requests.clear();
  CHECK_THROWS_AS(sampler.draw(prompt, 1, 2), TransportError);
  CHECK(requests.size() == 3);
  failures_left = 0;

  with_logprobs = false;
  Sample ph = sampler.draw(prompt, 1, 3);
  CHECK(ph.origin == "endpoint-placeholder");
  CHECK(ph.token_logprobs.size() == metrics::rouge_tokens(ph.raw_text).size());
  CHECK(sampler.placeholder_count() == 1);
}

TEST_CASE("endpoint client enforces its timeout") {
  Server server;
  server.svr().Post("/slow", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(chat_response("p.", true), "application/json");
  });
  EndpointSettings s;
  s.url = server.url("/slow");
  s.retries = 0;
  s.timeout_seconds = 0.2;
  EndpointSampler sampler(s);
  auto prompt = build_prompt(sample_entry(1, 5), IclVariant::kOneHop);
  auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(sampler.draw(prompt, 0, 0), TransportError);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(1400));
}

TEST_CASE("response parsing and judge scorer") {
  auto [t1, l1] = parse_response(R"({"choices":[{"text":"p.","logprobs":{"token_logprobs":[null,-1.5,-0.5]}}]})");
  CHECK(t1 == "p.");
  CHECK(l1 == std::vector<double>{-1.5, -0.5});
  CHECK_THROWS_AS(parse_response("not json"), TransportError);
  CHECK_THROWS_AS(parse_response(R"({"choices":[]})"), TransportError);

  Server server;
  nlohmann::json seen;
  server.svr().Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    res.set_content(R"({"choices":[{"text":"a b","logprobs":{"token_logprobs":[null,-2.0,-1.0]}}]})",
                    "application/json");
  });
  EndpointSettings s;
  s.url = server.url("/v1/completions");
  HttpJudgeScorer judge(s);
  CHECK(judge.score("a b") == std::vector<double>{-2.0, -1.0});
  CHECK(seen["echo"] == true);
  CHECK(seen["max_tokens"] == 0);
  CHECK(seen["prompt"] == "a b");
}
