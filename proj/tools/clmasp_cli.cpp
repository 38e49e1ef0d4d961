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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clmasp/harness.hpp"

namespace h = clmasp::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitTransport = 4;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string generator;
  std::optional<std::size_t> threads;
};

h::ExperimentConfig load(const Globals& g) {
  auto c = g.config_path.empty() ? h::config_from_json("{}") : h::load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.output.empty()) c.output_dir = g.output;
  if (!g.generator.empty()) c.generator.kind = clmasp::generator::kind_from_name(g.generator);
  if (g.threads) c.threads = *g.threads;
  c.validate();
  return c;
}

std::string out_path(const h::ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string fmt(const clmasp::conformal::Lambda& l) {
  return "(" + fmt(l.lambda1) + ", " + fmt(l.lambda2) + ", " + fmt(l.lambda3) + ")";
}

void print_accuracy(const h::TrialReport& r) {
  std::cout << r.label << "\n";
  for (const auto& [hops, s] : r.per_hop) {
    std::cout << "  hops " << hops << ": " << fmt(100.0 * s.accuracy()) << "% (" << s.correct << "/"
              << s.n << ")\n";
  }
  if (r.degraded) std::cout << "  degraded entries: " << r.degraded << "\n";
}

std::vector<double> parse_lambda(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
  if (out.size() != 3) throw h::ConfigError("--lambda expects three comma-separated values");
  return out;
}

clmasp::stepgame::HopMix parse_hop_mix(const std::string& text) {
  if (text.empty()) return clmasp::stepgame::uniform_hop_mix();
  clmasp::stepgame::HopMix mix;
  try {
    if (auto dash = text.find('-'); dash != std::string::npos && text.find(':') == std::string::npos) {
      return clmasp::stepgame::uniform_hop_mix(std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1)));
    }
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
      auto colon = part.find(':');
      if (colon == std::string::npos) throw h::ConfigError("hop mix entries must look like h:w");
      mix[std::stoi(part.substr(0, colon))] = std::stod(part.substr(colon + 1));
    }
  } catch (const std::logic_error& e) {
    throw h::ConfigError("bad --hop-mix '" + text + "'");
  }
  return mix;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal sampling of ASP programs for spatial reasoning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", h::version_string());
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--output", g.output, "Output directory");
  app.add_option("--generator", g.generator, "Generator kind")
      ->check(CLI::IsMember({"endpoint", "replay", "synthetic"}));
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  clmasp::stepgame::SplitSizes sizes;
  std::string hop_mix_text;
  auto* gen = app.add_subcommand("gen-data", "Write train, validation and test splits as JSONL");
  gen->add_option("--train", sizes.train, "Train split size");
  gen->add_option("--validation", sizes.validation, "Validation split size");
  gen->add_option("--test", sizes.test, "Test split size");
  gen->add_option("--hop-mix", hop_mix_text,
                  "Hop weights as h:w,h:w or a range lo-hi (default uniform over 1-24)");

  bool reuse = false;
  auto* cal = app.add_subcommand("calibrate", "Sample the calibration set and choose thresholds");
  cal->add_flag("--reuse-cache", reuse, "Reuse calibration_cache.jsonl if present");

  std::string report_path, lambda_text;
  std::optional<double> epsilon;
  auto* ev = app.add_subcommand("eval", "Run conformal sampling on the test slices");
  ev->add_option("--calibration-report", report_path, "Calibration report to read thresholds from");
  auto* lam = ev->add_option("--lambda", lambda_text, "Explicit thresholds l1,l2,l3");
  ev->add_option("--epsilon", epsilon, "Risk level recorded with --lambda")->needs(lam);
  lam->excludes(ev->get_option("--calibration-report"));

  auto* base = app.add_subcommand("baseline", "Greedy single-sample baseline on the test slices");

  std::optional<std::size_t> trials;
  auto* cov = app.add_subcommand("coverage-sim", "Repeated calibrate/test splits on synthetic data");
  cov->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);

  std::vector<std::string> files;
  auto* rep = app.add_subcommand("report", "Render trial reports");
  rep->add_option("files", files, "Trial report JSON files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto c = load(g);

    if (gen->parsed()) {
      auto mix = parse_hop_mix(hop_mix_text);
      auto plan = clmasp::stepgame::plan_splits(sizes, mix, c.seed);
      std::filesystem::create_directories(c.output_dir);
      nlohmann::json manifest = {{"seed", c.seed}, {"version", h::version_string()}};
      for (auto split : {clmasp::stepgame::SplitName::kTrain, clmasp::stepgame::SplitName::kValidation,
                         clmasp::stepgame::SplitName::kTest}) {
        std::string name(clmasp::stepgame::split_name(split));
        std::string path = out_path(c, name + ".jsonl");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw h::ConfigError("cannot write " + path);
        const std::size_t n = plan.hops[static_cast<std::size_t>(split)].size();
        for (std::size_t i = 0; i < n; ++i) out << clmasp::stepgame::to_jsonl(plan.entry_for(split, i)) << '\n';
        nlohmann::json dist = nlohmann::json::object();
        for (const auto& [hops, count] : plan.hop_distribution(split)) dist[std::to_string(hops)] = count;
        manifest[name] = {{"path", path}, {"entries", n}, {"hop_distribution", dist}};
        std::cout << "wrote " << n << " entries to " << path << "\n";
      }
      h::write_file(out_path(c, "splits.json"), manifest.dump(2));
    } else if (cal->parsed()) {
      auto art = h::run_calibration(c, reuse);
      const auto& r = art.result;
      std::cout << "calibration entries: " << r.n << ", grid size: " << r.grid_size
                << ", threshold: " << fmt(r.threshold) << "\n";
      if (!r.ok) {
        std::cerr << "calibration failed: no configuration is valid at any risk level\n"
                  << "  smallest p-value " << fmt(r.best_invalid_pvalue) << " at lambda "
                  << fmt(r.best_invalid) << "\n";
        return kExitCalibration;
      }
      std::cout << "lambda* = " << fmt(r.lambda_star) << "\n"
                << "epsilon* = " << fmt(r.epsilon_star) << "\n"
                << "objective = " << fmt(r.objective) << ", empirical risk = " << fmt(r.empirical_risk)
                << ", p-value = " << fmt(r.pvalue) << "\n"
                << "report: " << out_path(c, "calibration_report.json") << "\n";
    } else if (ev->parsed()) {
      h::CalibrationChoice ch;
      if (!lambda_text.empty()) {
        auto v = parse_lambda(lambda_text);
        ch.lambda = {v[0], v[1], v[2]};
        ch.epsilon = epsilon.value_or(1.0);
      } else {
        ch = h::read_calibration_report(report_path.empty() ? out_path(c, "calibration_report.json")
                                                            : report_path);
      }
      auto r = h::run_eval(c, ch.lambda, ch.epsilon, ch.judge_scale);
      std::string path = out_path(c, "trial_clm_" + r.metric + ".json");
      h::write_file(path, h::report_to_json(r));
      print_accuracy(r);
      std::cout << "report: " << path << "\n";
    } else if (base->parsed()) {
      auto r = h::run_baseline(c);
      std::string path = out_path(c, "trial_baseline.json");
      h::write_file(path, h::report_to_json(r));
      print_accuracy(r);
      std::cout << "report: " << path << "\n";
    } else if (cov->parsed()) {
      if (trials) c.coverage_trials = *trials;
      auto r = h::run_coverage_sim(c);
      auto [lo, hi] = r.violation_interval();
      std::string path = out_path(c, "coverage.json");
      h::write_file(path, h::coverage_to_json(r, c));
      std::cout << "trials: " << r.trials << ", violations: " << r.violations
                << ", calibration failures: " << r.calibration_failures << "\n"
                << "violation fraction: " << fmt(r.violation_fraction()) << " (95% CI " << fmt(lo)
                << " to " << fmt(hi) << "), delta = " << fmt(c.calibration.delta) << "\n"
                << "report: " << path << "\n";
    } else if (rep->parsed()) {
      std::vector<h::TrialReport> reports;
      for (const auto& f : files) reports.push_back(h::report_from_json(h::read_file(f)));
      auto rendered = h::render_reports(reports);
      std::cout << rendered.text;
      h::write_file(out_path(c, "report.json"), rendered.json);
    }
  } catch (const h::CalibrationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const clmasp::conformal::SamplerError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const clmasp::stepgame::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
