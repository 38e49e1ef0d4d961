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
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clmasp/harness.hpp"

namespace clmasp::harness {

using nlohmann::json;

bool set_correct(const std::vector<asp::Outcome>& member_outcomes, std::string_view gold,
                 VoteRule rule) {
  if (rule == VoteRule::kAny) {
    return std::any_of(member_outcomes.begin(), member_outcomes.end(), [](const asp::Outcome& o) {
      return o.kind == asp::OutcomeKind::kSingleCorrect;
    });
  }
  std::vector<std::pair<std::string, std::size_t>> votes;
  for (const auto& o : member_outcomes) {
    if (o.kind != asp::OutcomeKind::kSingleCorrect && o.kind != asp::OutcomeKind::kSingleWrong) continue;
    auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == o.note; });
    if (it == votes.end()) votes.emplace_back(o.note, 1);
    else ++it->second;
  }
  if (votes.empty()) return false;
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first == "answer(" + std::string(gold) + ")";
}

void summarize(TrialReport& r) {
  r.per_hop.clear();
  r.histogram.clear();
  r.total_samples = 0;
  r.degraded = 0;
  std::map<std::string, std::size_t> counts;
  for (const auto& e : r.entries) {
    auto& h = r.per_hop[e.hops];
    ++h.n;
    h.correct += e.correct;
    r.degraded += e.degraded;
    for (const auto& o : e.outcomes) ++counts[o];
    r.total_samples += e.outcomes.size();
  }
  r.histogram.assign(counts.begin(), counts.end());
  std::stable_sort(r.histogram.begin(), r.histogram.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
}

std::string report_to_json(const TrialReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"id", e.id},
                       {"hops", e.hops},
                       {"set_size", e.set_size},
                       {"draws", e.draws},
                       {"members", e.members},
                       {"outcomes", e.outcomes},
                       {"origins", e.origins},
                       {"correct", e.correct},
                       {"degraded", e.degraded}});
  }
  json per_hop = json::object();
  for (const auto& [h, s] : r.per_hop) {
    per_hop[std::to_string(h)] = {{"n", s.n}, {"correct", s.correct}, {"accuracy", s.accuracy()}};
  }
  json hist = json::array();
  for (const auto& [name, n] : r.histogram) hist.push_back({{"outcome", name}, {"count", n}});
  json j = {
      {"version", version_string()},
      {"kind", r.kind},
      {"label", r.label},
      {"metric", r.metric},
      {"config", json::parse(r.config_json)},
      {"lambda", r.lambda ? json{{"lambda1", r.lambda->lambda1},
                                 {"lambda2", r.lambda->lambda2},
                                 {"lambda3", r.lambda->lambda3}}
                          : json(nullptr)},
      {"epsilon", r.epsilon ? json(*r.epsilon) : json(nullptr)},
      {"per_hop", per_hop},
      {"histogram", hist},
      {"total_samples", r.total_samples},
      {"degraded", r.degraded},
      {"entries", entries},
  };
  return j.dump(2);
}

TrialReport report_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    TrialReport r;
    r.kind = j.at("kind").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    r.config_json = j.at("config").dump(2);
    if (!j.at("lambda").is_null()) {
      const auto& l = j.at("lambda");
      r.lambda = conformal::Lambda{l.at("lambda1").get<double>(), l.at("lambda2").get<double>(),
                                   l.at("lambda3").get<double>()};
    }
    if (!j.at("epsilon").is_null()) r.epsilon = j.at("epsilon").get<double>();
    for (const auto& e : j.at("entries")) {
      EntryResult er;
      er.id = e.at("id").get<std::string>();
      er.hops = e.at("hops").get<int>();
      er.set_size = e.at("set_size").get<std::size_t>();
      er.draws = e.at("draws").get<std::size_t>();
      er.members = e.at("members").get<std::vector<std::size_t>>();
      er.outcomes = e.at("outcomes").get<std::vector<std::string>>();
      er.origins = e.at("origins").get<std::vector<std::string>>();
      er.correct = e.at("correct").get<bool>();
      er.degraded = e.at("degraded").get<bool>();
      r.entries.push_back(std::move(er));
    }
    summarize(r);
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad trial report: ") + e.what());
  }
}

namespace {

std::string pct(double x) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

// Config with the metric-related keys removed.
json metric_free(const std::string& config_json) {
  json j = json::parse(config_json);
  j.erase("metric");
  j.erase("judge");
  j.erase("output_dir");
  return j;
}

}  // namespace

Rendered render_reports(const std::vector<TrialReport>& reports) {
  if (reports.empty()) throw ConfigError("no trial reports to render");

  std::set<int> hops;
  std::size_t width = 8;
  for (const auto& r : reports) {
    for (const auto& [h, s] : r.per_hop) hops.insert(h);
    width = std::max(width, r.label.size() + 2);
  }

  std::ostringstream text;
  json runs = json::array();

  text << "Accuracy (%) by hop count\n" << pad("run", width);
  for (int h : hops) text << pad(std::to_string(h), 8);
  text << "\n";
  for (const auto& r : reports) {
    text << pad(r.label, width);
    json acc = json::object();
    for (int h : hops) {
      auto it = r.per_hop.find(h);
      if (it == r.per_hop.end()) {
        text << pad("-", 8);
      } else {
        text << pad(pct(it->second.accuracy()), 8);
        acc[std::to_string(h)] = it->second.accuracy();
      }
    }
    text << "\n";
    json hist = json::array();
    for (const auto& [name, n] : r.histogram) hist.push_back({{"outcome", name}, {"count", n}});
    runs.push_back({{"label", r.label},
                    {"kind", r.kind},
                    {"metric", r.metric},
                    {"accuracy", acc},
                    {"histogram", hist},
                    {"total_samples", r.total_samples},
                    {"degraded", r.degraded}});
  }

  text << "\nOutcome histogram over all drawn samples\n";
  for (const auto& r : reports) {
    text << r.label << " (" << r.total_samples << " samples";
    if (r.degraded) text << ", " << r.degraded << " degraded";
    text << ")\n";
    for (const auto& [name, n] : r.histogram) {
      double share = r.total_samples ? static_cast<double>(n) / static_cast<double>(r.total_samples) : 0.0;
      text << "  " << pad(name, 22) << pad(std::to_string(n), 10) << pct(share) << "%\n";
    }
  }

  json comparisons = json::array();
  for (std::size_t a = 0; a < reports.size(); ++a) {
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      const auto& ra = reports[a];
      const auto& rb = reports[b];
      if (ra.kind != "clm" || rb.kind != "clm" || ra.metric == rb.metric) continue;
      if (metric_free(ra.config_json) != metric_free(rb.config_json)) continue;
      if (comparisons.empty()) text << "\nDiversity metric comparison (accuracy %)\n";
      text << pad("metric", width);
      for (int h : hops) text << pad(std::to_string(h), 8);
      text << "\n";
      json pair = json::array();
      for (const auto* r : {&ra, &rb}) {
        text << pad(r->metric, width);
        json acc = json::object();
        for (int h : hops) {
          auto it = r->per_hop.find(h);
          text << pad(it == r->per_hop.end() ? "-" : pct(it->second.accuracy()), 8);
          if (it != r->per_hop.end()) acc[std::to_string(h)] = it->second.accuracy();
        }
        text << "\n";
        pair.push_back({{"metric", r->metric}, {"accuracy", acc}});
      }
      comparisons.push_back(pair);
    }
  }

  json j = {{"version", version_string()}, {"runs", runs}, {"metric_comparison", comparisons}};
  return {text.str(), j.dump(2)};
}

}  // namespace clmasp::harness
