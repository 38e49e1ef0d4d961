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

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "clmasp/generator.hpp"
#include "clmasp/random.hpp"

namespace clmasp::generator {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw ConfigError("malformed endpoint URL: " + url);
  return {m[1], m[2].matched ? m[2].str() : std::string("/")};
}

// POST with bounded retries and timeouts; returns the response body.
std::string post_json(const EndpointSettings& s, const std::string& body) {
  auto [base, path] = split_url(s.url);
  httplib::Client cli(base);
  auto secs = std::chrono::duration<double>(s.timeout_seconds);
  auto usec = std::chrono::duration_cast<std::chrono::microseconds>(secs);
  cli.set_connection_timeout(usec);
  cli.set_read_timeout(usec);
  cli.set_write_timeout(usec);
  httplib::Headers headers;
  if (const char* key = std::getenv(s.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  std::string last_error;
  const int attempts = std::max(1, s.retries + 1);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 << std::min(attempt, 6)));
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return res->body;
  }
  throw TransportError("endpoint " + s.url + " failed after " + std::to_string(attempts) +
                       " attempts: " + last_error);
}

}  // namespace

std::string request_body(const EndpointSettings& s, const EndpointRequest& r) {
  nlohmann::json j;
  j["model"] = s.model;
  j["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}});
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  j["stop"] = r.stop;
  j["logprobs"] = true;
  if (r.seed) j["seed"] = *r.seed;
  return j.dump();
}

std::pair<std::string, std::vector<double>> parse_response(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    const auto& choice = j.at("choices").at(0);
    std::string text;
    if (choice.contains("message")) {
      text = choice.at("message").at("content").get<std::string>();
    } else {
      text = choice.at("text").get<std::string>();
    }
    std::vector<double> lp;
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
      const auto& l = choice["logprobs"];
      if (l.contains("content") && l["content"].is_array()) {
        for (const auto& t : l["content"]) lp.push_back(t.at("logprob").get<double>());
      } else if (l.contains("token_logprobs") && l["token_logprobs"].is_array()) {
        for (const auto& t : l["token_logprobs"]) {
          if (t.is_number()) lp.push_back(t.get<double>());
        }
      }
    }
    return {std::move(text), std::move(lp)};
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed endpoint response: ") + e.what());
  }
}

EndpointSampler::EndpointSampler(EndpointSettings settings, std::vector<std::string> stop_tokens)
    : settings_(std::move(settings)),
      stop_(stop_tokens.empty() ? settings_.stop : std::move(stop_tokens)),
      in_flight_(std::clamp(settings_.max_in_flight, 1, 1024)) {
  if (settings_.retries < 0) throw ConfigError("endpoint retries must be >= 0");
  if (!(settings_.timeout_seconds > 0.0)) throw ConfigError("endpoint timeout must be > 0");
  if (settings_.max_tokens < 1) throw ConfigError("endpoint max_tokens must be >= 1");
  split_url(settings_.url);
}

Sample EndpointSampler::request(const PromptSpec& prompt, double temperature,
                                std::optional<std::uint64_t> seed) {
  EndpointRequest r{prompt.rendered, temperature, settings_.max_tokens, settings_.stop, seed};
  std::string body = request_body(settings_, r);
  in_flight_.acquire();
  std::string response;
  try {
    response = post_json(settings_, body);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();
  auto [text, lp] = parse_response(response);
  std::string origin = "endpoint";
  if (lp.empty()) {
    if (placeholders_.fetch_add(1) == 0) {
      std::cerr << "WARNING: endpoint returned no token logprobs; using uniform placeholder "
                   "logprobs. Quality and confidence are uninformative for this run.\n";
    }
    std::size_t n = 0;
    bool in = false;
    for (char c : text) {
      bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
      if (!ws && !in) ++n;
      in = !ws;
    }
    lp.assign(std::max<std::size_t>(1, n), std::log(0.5));
    origin = "endpoint-placeholder";
  }
  return finish_sample(std::move(text), std::move(lp), std::move(origin), stop_);
}

Sample EndpointSampler::draw(const PromptSpec& prompt, std::uint64_t seed, std::size_t index) {
  return request(prompt, settings_.temperature,
                 derive_seed(seed, {hash_string(prompt.id), index}) >> 1);
}

Sample EndpointSampler::baseline(const PromptSpec& prompt) {
  return request(prompt, 0.0, std::nullopt);
}

HttpJudgeScorer::HttpJudgeScorer(EndpointSettings settings) : settings_(std::move(settings)) {
  split_url(settings_.url);
}

std::vector<double> HttpJudgeScorer::score(std::string_view text) {
  nlohmann::json j;
  j["model"] = settings_.model;
  j["prompt"] = std::string(text);
  j["echo"] = true;
  j["logprobs"] = 1;
  j["max_tokens"] = 0;
  auto [echo, lp] = parse_response(post_json(settings_, j.dump()));
  if (lp.empty()) throw TransportError("judge endpoint returned no prompt logprobs");
  return lp;
}

}  // namespace clmasp::generator
