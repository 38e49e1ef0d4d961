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
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clmasp/harness.hpp"

#ifndef CLMASP_VERSION
#define CLMASP_VERSION "unknown"
#endif

namespace clmasp::harness {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

generator::EndpointSettings endpoint_from(const json& j, generator::EndpointSettings e) {
  check_keys(j, {"url", "model", "temperature", "max_tokens", "stop", "api_key_env",
                 "timeout_seconds", "retries", "max_in_flight"},
             "endpoint");
  read(j, "url", e.url);
  read(j, "model", e.model);
  read(j, "temperature", e.temperature);
  read(j, "max_tokens", e.max_tokens);
  read(j, "stop", e.stop);
  read(j, "api_key_env", e.api_key_env);
  read(j, "timeout_seconds", e.timeout_seconds);
  read(j, "retries", e.retries);
  read(j, "max_in_flight", e.max_in_flight);
  return e;
}

json endpoint_to(const generator::EndpointSettings& e) {
  return {{"url", e.url},
          {"model", e.model},
          {"temperature", e.temperature},
          {"max_tokens", e.max_tokens},
          {"stop", e.stop},
          {"api_key_env", e.api_key_env},
          {"timeout_seconds", e.timeout_seconds},
          {"retries", e.retries},
          {"max_in_flight", e.max_in_flight}};
}

generator::SyntheticSettings synthetic_from(const json& j) {
  check_keys(j, {"clean", "errors", "clean_mean", "corrupted_mean", "sample_sd",
                 "admissibility_range", "shuffle_facts"},
             "synthetic");
  double clean = j.value("clean", 0.5);
  auto s = generator::SyntheticSettings::with_default_mix(clean);
  if (j.contains("errors")) {
    s.errors.clear();
    for (const auto& [name, w] : j.at("errors").items()) {
      s.errors[generator::error_class_from_name(name)] = w.get<double>();
    }
  }
  read(j, "clean_mean", s.clean_mean);
  read(j, "corrupted_mean", s.corrupted_mean);
  read(j, "sample_sd", s.sample_sd);
  read(j, "shuffle_facts", s.shuffle_facts);
  if (j.contains("admissibility_range") && !j.at("admissibility_range").is_null()) {
    auto r = j.at("admissibility_range").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("admissibility_range must be [lo, hi]");
    s.admissibility_range = std::make_pair(r[0], r[1]);
  }
  return s;
}

json synthetic_to(const generator::SyntheticSettings& s) {
  json errors = json::object();
  for (const auto& [c, w] : s.errors) errors[std::string(generator::error_class_name(c))] = w;
  json j = {{"clean", s.clean},
            {"errors", errors},
            {"clean_mean", s.clean_mean},
            {"corrupted_mean", s.corrupted_mean},
            {"sample_sd", s.sample_sd},
            {"shuffle_facts", s.shuffle_facts}};
  if (s.admissibility_range) {
    j["admissibility_range"] = {s.admissibility_range->first, s.admissibility_range->second};
  } else {
    j["admissibility_range"] = nullptr;
  }
  return j;
}

}  // namespace

std::string_view calibration_variant_name(CalibrationVariant v) {
  return v == CalibrationVariant::kMixed1To5 ? "mixed_1_to_5" : "single_hop_1";
}

CalibrationVariant calibration_variant_from_name(std::string_view name) {
  if (name == "mixed_1_to_5") return CalibrationVariant::kMixed1To5;
  if (name == "single_hop_1") return CalibrationVariant::kSingleHop1;
  throw ConfigError("unknown calibration variant: " + std::string(name));
}

generator::IclVariant paired_icl_variant(CalibrationVariant v) {
  return v == CalibrationVariant::kMixed1To5 ? generator::IclVariant::kTwoPlusFour
                                             : generator::IclVariant::kOneHop;
}

void ExperimentConfig::validate() const {
  if (icl_variant != paired_icl_variant(calibration_variant)) {
    throw ConfigError("icl_variant " + std::string(generator::variant_name(icl_variant)) +
                      " does not pair with calibration variant " +
                      std::string(calibration_variant_name(calibration_variant)));
  }
  if (calibration_size < 1) throw ConfigError("calibration_size must be >= 1");
  for (const auto& [h, n] : test_slices) {
    if (h < stepgame::kMinHops || h > stepgame::kMaxHops) {
      throw ConfigError("test slice hops out of range: " + std::to_string(h));
    }
    if (n < 1) throw ConfigError("test slice size must be >= 1");
  }
  if (judge_kind != "stub" && judge_kind != "endpoint") {
    throw ConfigError("judge kind must be stub or endpoint");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (coverage_n_cal < 1 || coverage_n_test < 1) throw ConfigError("coverage sizes must be >= 1");
  try {
    calibration.validate();
    generator.synthetic.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig config_from_json(const std::string& json_text) {
  ExperimentConfig c;
  try {
    json j = json::parse(json_text);
    check_keys(j, {"seed", "output_dir", "calibration_variant", "icl_variant", "calibration_size",
                   "test_slices", "calibration_path", "test_path", "generator", "metric", "judge",
                   "calibration", "vote", "labels", "threads", "coverage"},
               "config");
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);
    if (j.contains("calibration_variant")) {
      c.calibration_variant = calibration_variant_from_name(j.at("calibration_variant").get<std::string>());
    }
    c.icl_variant = paired_icl_variant(c.calibration_variant);
    if (j.contains("icl_variant")) {
      c.icl_variant = generator::variant_from_name(j.at("icl_variant").get<std::string>());
    }
    read(j, "calibration_size", c.calibration_size);
    if (j.contains("test_slices")) {
      c.test_slices.clear();
      for (const auto& [h, n] : j.at("test_slices").items()) {
        c.test_slices[std::stoi(h)] = n.get<std::size_t>();
      }
    }
    read(j, "calibration_path", c.calibration_path);
    read(j, "test_path", c.test_path);

    if (j.contains("generator")) {
      const json& g = j.at("generator");
      check_keys(g, {"kind", "stop_tokens", "replay_path", "endpoint", "synthetic"}, "generator");
      if (g.contains("kind")) c.generator.kind = generator::kind_from_name(g.at("kind").get<std::string>());
      read(g, "stop_tokens", c.generator.stop_tokens);
      read(g, "replay_path", c.generator.replay_path);
      if (g.contains("endpoint")) c.generator.endpoint = endpoint_from(g.at("endpoint"), c.generator.endpoint);
      if (g.contains("synthetic")) c.generator.synthetic = synthetic_from(g.at("synthetic"));
    }
    if (j.contains("metric")) c.metric = metrics::diversity_from_name(j.at("metric").get<std::string>());
    if (j.contains("judge")) {
      const json& jj = j.at("judge");
      check_keys(jj, {"kind", "endpoint"}, "judge");
      read(jj, "kind", c.judge_kind);
      if (jj.contains("endpoint")) c.judge_endpoint = endpoint_from(jj.at("endpoint"), c.judge_endpoint);
    }
    if (j.contains("calibration")) {
      const json& k = j.at("calibration");
      check_keys(k, {"grid_step", "delta", "rho1", "rho2", "k", "epsilon", "loss", "threads"},
                 "calibration");
      read(k, "grid_step", c.grid_step);
      read(k, "delta", c.calibration.delta);
      read(k, "rho1", c.calibration.rho1);
      read(k, "rho2", c.calibration.rho2);
      read(k, "k", c.calibration.k);
      read(k, "threads", c.calibration.threads);
      if (k.contains("epsilon") && !k.at("epsilon").is_null()) {
        c.calibration.pinned_epsilon = k.at("epsilon").get<double>();
      }
      if (k.contains("loss")) {
        std::string loss = k.at("loss").get<std::string>();
        if (loss == "syntax") c.calibration.loss = conformal::LossKind::kSyntax;
        else if (loss == "correctness") c.calibration.loss = conformal::LossKind::kCorrectness;
        else throw ConfigError("calibration loss must be syntax or correctness");
      }
    }
    if (j.contains("vote")) {
      std::string v = j.at("vote").get<std::string>();
      if (v == "any") c.vote = VoteRule::kAny;
      else if (v == "plurality") c.vote = VoteRule::kPlurality;
      else throw ConfigError("vote must be any or plurality");
    }
    if (j.contains("labels")) {
      std::string l = j.at("labels").get<std::string>();
      if (l == "solve") c.labels = LabelMode::kSolve;
      else if (l == "generator") c.labels = LabelMode::kGenerator;
      else throw ConfigError("labels must be solve or generator");
    }
    read(j, "threads", c.threads);
    if (j.contains("coverage")) {
      const json& v = j.at("coverage");
      check_keys(v, {"trials", "n_cal", "n_test"}, "coverage");
      read(v, "trials", c.coverage_trials);
      read(v, "n_cal", c.coverage_n_cal);
      read(v, "n_test", c.coverage_n_test);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const generator::ConfigError& e) {
    throw ConfigError(e.what());
  } catch (const metrics::MetricError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  double divisions = std::round(1.0 / c.grid_step);
  if (!(c.grid_step > 0.0) || std::fabs(divisions * c.grid_step - 1.0) > 1e-9) {
    throw ConfigError("grid_step must divide 1 evenly");
  }
  c.calibration.grid = conformal::LambdaGrid::uniform(static_cast<int>(divisions));
  c.calibration.diversity = c.metric;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json slices = json::object();
  for (const auto& [h, n] : c.test_slices) slices[std::to_string(h)] = n;
  const auto& k = c.calibration;
  json j = {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"calibration_variant", calibration_variant_name(c.calibration_variant)},
      {"icl_variant", generator::variant_name(c.icl_variant)},
      {"calibration_size", c.calibration_size},
      {"test_slices", slices},
      {"calibration_path", c.calibration_path},
      {"test_path", c.test_path},
      {"generator",
       {{"kind", generator::kind_name(c.generator.kind)},
        {"stop_tokens", c.generator.stop_tokens},
        {"replay_path", c.generator.replay_path},
        {"endpoint", endpoint_to(c.generator.endpoint)},
        {"synthetic", synthetic_to(c.generator.synthetic)}}},
      {"metric", metrics::diversity_name(c.metric)},
      {"judge", {{"kind", c.judge_kind}, {"endpoint", endpoint_to(c.judge_endpoint)}}},
      {"calibration",
       {{"grid_step", c.grid_step},
        {"delta", k.delta},
        {"rho1", k.rho1},
        {"rho2", k.rho2},
        {"k", k.k},
        {"epsilon", k.pinned_epsilon ? json(*k.pinned_epsilon) : json(nullptr)},
        {"loss", k.loss == conformal::LossKind::kSyntax ? "syntax" : "correctness"},
        {"threads", k.threads}}},
      {"vote", c.vote == VoteRule::kAny ? "any" : "plurality"},
      {"labels", c.labels == LabelMode::kSolve ? "solve" : "generator"},
      {"threads", c.threads},
      {"coverage", {{"trials", c.coverage_trials}, {"n_cal", c.coverage_n_cal}, {"n_test", c.coverage_n_test}}},
  };
  return j.dump(2);
}

std::string version_string() { return CLMASP_VERSION; }

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace clmasp::harness
