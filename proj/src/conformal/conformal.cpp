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

#include "clmasp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

#include <boost/math/distributions/beta.hpp>
#include <json.hpp>

#include "clmasp/random.hpp"

namespace clmasp::conformal {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

long double log_add(long double a, long double b) {
  if (a == -std::numeric_limits<long double>::infinity()) return b;
  if (b > a) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// cdf[m] for m = 0..n. Below the mean the lower tail is summed directly; above
// it the CDF is 1 minus the upper tail, so values near 1 keep full precision.
std::vector<double> cdf_all(std::size_t n, double epsilon) {
  std::vector<double> out(n + 1);
  if (epsilon <= 0.0) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  if (epsilon >= 1.0) {
    std::fill(out.begin(), out.end(), 0.0);
    out[n] = 1.0;
    return out;
  }
  const long double ninf = -std::numeric_limits<long double>::infinity();
  const long double le = std::log(static_cast<long double>(epsilon));
  const long double l1e = std::log1p(-static_cast<long double>(epsilon));
  const long double ln = static_cast<long double>(n);
  const long double lgn = std::lgamma(ln + 1.0L);
  std::vector<long double> lp(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const long double li = static_cast<long double>(i);
    lp[i] = lgn - std::lgamma(li + 1.0L) - std::lgamma(ln - li + 1.0L) + li * le + (ln - li) * l1e;
  }
  const double mean = static_cast<double>(n) * epsilon;
  long double acc = ninf;
  for (std::size_t m = 0; m <= n && static_cast<double>(m) < mean; ++m) {
    acc = log_add(acc, lp[m]);
    out[m] = static_cast<double>(std::min(1.0L, std::exp(acc)));
  }
  acc = ninf;
  for (std::size_t m = n; m-- > 0 && static_cast<double>(m) >= mean;) {
    acc = log_add(acc, lp[m + 1]);
    out[m] = static_cast<double>(std::max(0.0L, 1.0L - std::exp(acc)));
  }
  out[n] = 1.0;
  return out;
}

// True when a comes before b under (objective asc, λ1 desc, λ2 asc, λ3 desc).
bool better(double oa, const Lambda& a, double ob, const Lambda& b) {
  if (oa != ob) return oa < ob;
  if (a.lambda1 != b.lambda1) return a.lambda1 > b.lambda1;
  if (a.lambda2 != b.lambda2) return a.lambda2 < b.lambda2;
  return a.lambda3 > b.lambda3;
}

struct Sweep {
  std::vector<std::size_t> loss_counts;  // per (i1, i2)
  std::vector<double> objectives;        // per grid index, averaged
};

struct Prepared {
  std::vector<std::vector<int>> admit;
  std::vector<std::vector<double>> prob;  // exp(sequence logprob)
};

Prepared prepare(const std::vector<CalibrationRecord>& records, const CalibrationSettings& s) {
  Prepared p;
  for (const auto& r : records) {
    std::vector<int> a;
    std::vector<double> pr;
    for (const auto& x : r.samples) {
      a.push_back(s.loss == LossKind::kSyntax ? x.admissible : x.correct);
      pr.push_back(std::exp(x.seq_logprob));
    }
    p.admit.push_back(std::move(a));
    p.prob.push_back(std::move(pr));
  }
  return p;
}

bool passes(metrics::DiversityKind kind, double d, double lambda2, double scale) {
  if (kind == metrics::DiversityKind::kRougeL) return d <= lambda2;
  return d >= lambda2 * scale;
}

// Members accepted with no early stop, plus the running confidence after each
// acceptance. Any λ3 stop truncates this list to a prefix.
void greedy(const CalibrationRecord& r, const std::vector<int>& admit,
            const std::vector<double>& prob, double l1, double l2, double scale,
            metrics::DiversityKind kind, std::vector<std::size_t>& accepted,
            std::vector<double>& conf) {
  accepted.clear();
  conf.clear();
  double c = 0.0;
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    if (!admit[i] || r.samples[i].quality < l1) continue;
    bool ok = true;
    for (std::size_t m : accepted) {
      if (!passes(kind, r.diversity[i][m], l2, scale)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    accepted.push_back(i);
    c = std::max(c, prob[i]);
    conf.push_back(c);
  }
}

Sweep sweep(const std::vector<CalibrationRecord>& records, const CalibrationSettings& s,
            double scale) {
  const auto& g = s.grid;
  const std::size_t n1 = g.axis1.size(), n2 = g.axis2.size(), n3 = g.axis3.size();
  Sweep out;
  out.loss_counts.assign(n1 * n2, 0);
  out.objectives.assign(g.size(), 0.0);
  Prepared prep = prepare(records, s);

  auto rows = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> accepted;
    std::vector<double> conf;
    for (std::size_t e = 0; e < records.size(); ++e) {
      const auto& r = records[e];
      for (std::size_t i1 = begin; i1 < end; ++i1) {
        for (std::size_t i2 = 0; i2 < n2; ++i2) {
          greedy(r, prep.admit[e], prep.prob[e], g.axis1[i1], g.axis2[i2], scale, s.diversity,
                 accepted, conf);
          if (accepted.empty()) ++out.loss_counts[i1 * n2 + i2];
          for (std::size_t i3 = 0; i3 < n3; ++i3) {
            std::size_t size = accepted.size();
            std::size_t draws = r.samples.size();
            for (std::size_t t = 0; t < conf.size(); ++t) {
              if (conf[t] >= g.axis3[i3]) {
                size = t + 1;
                draws = accepted[t] + 1;
                break;
              }
            }
            out.objectives[g.index(i1, i2, i3)] +=
                objective_term(size, draws, r.first_correct, s.rho1, s.rho2);
          }
        }
      }
    }
  };

  std::size_t threads = std::clamp<std::size_t>(s.threads, 1, n1);
  if (threads == 1) {
    rows(0, n1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(rows, n1 * t / threads, n1 * (t + 1) / threads);
    }
    for (auto& th : pool) th.join();
  }
  const double n = static_cast<double>(std::max<std::size_t>(records.size(), 1));
  for (auto& o : out.objectives) o /= n;
  return out;
}

}  // namespace

// ---- configuration -----------------------------------------------------------

void ThresholdConfig::validate() const {
  if (!in_unit(lambda.lambda1) || !in_unit(lambda.lambda2) || !in_unit(lambda.lambda3)) {
    throw ConfigError("lambda components must lie in [0, 1]");
  }
  if (!in_unit(epsilon)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
}

LambdaGrid LambdaGrid::uniform(int divisions) {
  if (divisions < 1) throw ConfigError("grid divisions must be >= 1");
  std::vector<double> axis;
  for (int i = 0; i <= divisions; ++i) axis.push_back(static_cast<double>(i) / divisions);
  return LambdaGrid{axis, axis, axis};
}

Lambda LambdaGrid::at(std::size_t index) const {
  std::size_t i3 = index % axis3.size();
  std::size_t rest = index / axis3.size();
  std::size_t i2 = rest % axis2.size();
  std::size_t i1 = rest / axis2.size();
  return Lambda{axis1.at(i1), axis2.at(i2), axis3.at(i3)};
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 100; ++i) out.push_back(static_cast<double>(i) / 100.0);
  return out;
}

void CalibrationSettings::validate() const {
  for (const auto* axis : {&grid.axis1, &grid.axis2, &grid.axis3}) {
    if (axis->empty()) throw ConfigError("lambda grid axis is empty");
    for (double v : *axis) {
      if (!in_unit(v)) throw ConfigError("lambda grid values must lie in [0, 1]");
    }
  }
  if (epsilon_grid.empty()) throw ConfigError("epsilon grid is empty");
  for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
    if (!in_unit(epsilon_grid[i])) throw ConfigError("epsilon grid values must lie in [0, 1]");
    if (i > 0 && epsilon_grid[i] <= epsilon_grid[i - 1]) {
      throw ConfigError("epsilon grid must be strictly increasing");
    }
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (rho1 < 0.0 || rho2 < 0.0 || !(rho1 + rho2 > 0.0)) {
    throw ConfigError("rho1, rho2 must be non-negative with a positive sum");
  }
  if (k < 1) throw ConfigError("budget k must be >= 1");
  if (pinned_epsilon && !in_unit(*pinned_epsilon)) {
    throw ConfigError("pinned epsilon must lie in [0, 1]");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

// ---- set construction ----------------------------------------------------------

ConformalSet build_conformal_set(const DrawFn& draw, const metrics::MetricBundle& metrics,
                                 const AdmissionFn& admission, const Lambda& lambda,
                                 std::size_t k) {
  if (k < 1) throw ConfigError("budget k must be >= 1");
  ConformalSet set;
  for (std::size_t i = 0; i < k; ++i) {
    Sample s;
    try {
      s = draw(i);
    } catch (const SamplerError& e) {
      set.degraded = true;
      set.degraded_reason = e.what();
      break;
    }
    set.draws = i + 1;
    if (admission(s) == 0) continue;
    if (metrics.quality(s) < lambda.lambda1) continue;
    bool ok = true;
    for (const auto& m : set.members) {
      if (!metrics.diversity_passes(metrics.diversity(s, m), lambda.lambda2)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    set.members.push_back(std::move(s));
    set.member_draws.push_back(i);
    if (metrics.confidence(set.members) >= lambda.lambda3) break;
  }
  return set;
}

int set_loss(const ConformalSet& set, const AdmissionFn& admission) {
  for (const auto& m : set.members) {
    if (admission(m) == 1) return 0;
  }
  return 1;
}

double empirical_risk(const std::vector<int>& losses) {
  if (losses.empty()) throw DomainError("empirical_risk: no losses");
  double sum = 0.0;
  for (int l : losses) sum += l;
  return sum / static_cast<double>(losses.size());
}

double binomial_cdf(std::size_t n, double epsilon, std::size_t m) {
  if (m >= n) return 1.0;
  return cdf_all(n, epsilon)[m];
}

double binomial_tail_pvalue(std::size_t n, double epsilon, double empirical_risk) {
  if (n < 1) throw DomainError("binomial_tail_pvalue: n must be >= 1");
  if (!in_unit(epsilon) || !in_unit(empirical_risk)) {
    throw DomainError("binomial_tail_pvalue: arguments outside [0, 1]");
  }
  // Guard against n * R̂ landing just under an integer, e.g. 500 * 0.074.
  double scaled = static_cast<double>(n) * empirical_risk;
  auto m = static_cast<std::size_t>(std::floor(scaled + 1e-9 * std::max(1.0, scaled)));
  return binomial_cdf(n, epsilon, m);
}

std::vector<double> binomial_cdf_table(std::size_t n, double epsilon) {
  return cdf_all(n, epsilon);
}

ValidSet select_valid_configs(const std::vector<std::pair<Lambda, double>>& pvalues, double delta,
                              std::size_t grid_size) {
  if (grid_size < 1) throw DomainError("select_valid_configs: grid_size must be >= 1");
  ValidSet out;
  out.threshold = delta / static_cast<double>(grid_size);
  for (const auto& [lambda, p] : pvalues) {
    if (p <= out.threshold) out.configs.emplace_back(lambda, p);
  }
  return out;
}

// ---- records -------------------------------------------------------------------

double CalibrationRecord::diversity_between(std::size_t i, std::size_t j) const {
  if (i == j) throw DomainError("diversity_between: identical indices");
  return i > j ? diversity.at(i).at(j) : diversity.at(j).at(i);
}

CalibrationRecord make_record(std::string entry_id, int hops, const std::vector<Sample>& samples,
                              const std::vector<int>& correct,
                              const std::vector<std::string>& outcomes,
                              const metrics::MetricBundle& bundle) {
  if (correct.size() != samples.size() || outcomes.size() != samples.size()) {
    throw DomainError("make_record: per-sample vectors differ in length");
  }
  CalibrationRecord r;
  r.entry_id = std::move(entry_id);
  r.hops = hops;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    SampleSummary x;
    x.admissible = s.admissible;
    x.correct = correct[i];
    x.quality = bundle.quality(s);
    x.seq_logprob = metrics::sequence_logprob(s);
    x.outcome = outcomes[i];
    x.origin = s.origin;
    r.samples.push_back(std::move(x));
    if (correct[i] && r.first_correct == 0) r.first_correct = i + 1;
  }
  r.diversity.resize(samples.size());
  if (bundle.diversity_kind == metrics::DiversityKind::kRougeL) {
    metrics::TokenInterner interner;
    std::vector<std::vector<std::uint32_t>> ids;
    for (const auto& s : samples) ids.push_back(interner.ids(s.text));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) r.diversity[i].push_back(metrics::rouge_l(ids[i], ids[j]));
    }
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        r.diversity[i].push_back(bundle.diversity(samples[i], samples[j]));
      }
    }
  }
  return r;
}

std::string record_to_json(const CalibrationRecord& r) {
  nlohmann::json j;
  j["id"] = r.entry_id;
  j["hops"] = r.hops;
  j["first_correct"] = r.first_correct;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : r.samples) {
    j["samples"].push_back({{"admissible", s.admissible},
                            {"correct", s.correct},
                            {"quality", s.quality},
                            {"seq_logprob", s.seq_logprob},
                            {"outcome", s.outcome},
                            {"origin", s.origin}});
  }
  j["diversity"] = r.diversity;
  return j.dump();
}

CalibrationRecord record_from_json(const std::string& line) {
  CalibrationRecord r;
  try {
    auto j = nlohmann::json::parse(line);
    r.entry_id = j.at("id").get<std::string>();
    r.hops = j.at("hops").get<int>();
    r.first_correct = j.at("first_correct").get<std::size_t>();
    for (const auto& s : j.at("samples")) {
      SampleSummary x;
      x.admissible = s.at("admissible").get<int>();
      x.correct = s.at("correct").get<int>();
      x.quality = s.at("quality").get<double>();
      x.seq_logprob = s.at("seq_logprob").get<double>();
      x.outcome = s.at("outcome").get<std::string>();
      x.origin = s.at("origin").get<std::string>();
      r.samples.push_back(std::move(x));
    }
    r.diversity = j.at("diversity").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad calibration record: ") + e.what());
  }
  if (r.diversity.size() != r.samples.size()) {
    throw ConfigError("bad calibration record: diversity matrix size mismatch");
  }
  for (std::size_t i = 0; i < r.diversity.size(); ++i) {
    if (r.diversity[i].size() != i) throw ConfigError("bad calibration record: ragged diversity row");
  }
  return r;
}

void write_records(std::ostream& out, const std::vector<CalibrationRecord>& records) {
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

std::vector<CalibrationRecord> read_records(std::istream& in) {
  std::vector<CalibrationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

double observed_judge_range(const std::vector<CalibrationRecord>& records) {
  double best = 0.0;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      if (!r.samples[i].admissible) continue;
      for (std::size_t j = 0; j < i; ++j) {
        if (r.samples[j].admissible) best = std::max(best, r.diversity[i][j]);
      }
    }
  }
  return best > 0.0 ? best : 1.0;
}

Replay replay_record(const CalibrationRecord& record, const Lambda& lambda,
                     const CalibrationSettings& settings, double judge_scale) {
  Replay out;
  double c = 0.0;
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    const auto& s = record.samples[i];
    out.draws = i + 1;
    int a = settings.loss == LossKind::kSyntax ? s.admissible : s.correct;
    if (!a || s.quality < lambda.lambda1) continue;
    bool ok = true;
    for (std::size_t m : out.members) {
      if (!passes(settings.diversity, record.diversity[i][m], lambda.lambda2, judge_scale)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.members.push_back(i);
    c = std::max(c, std::exp(s.seq_logprob));
    if (c >= lambda.lambda3) break;
  }
  out.set_size = out.members.size();
  out.loss = out.members.empty() ? 1 : 0;
  return out;
}

double objective_term(std::size_t set_size, std::size_t draws, std::size_t first_correct,
                      double rho1, double rho2) {
  double excess = 1.0;  // no correct sample: maximal excess
  if (first_correct > 0) {
    excess = draws == 0 || draws <= first_correct
                 ? 0.0
                 : static_cast<double>(draws - first_correct) / static_cast<double>(draws);
  }
  return rho1 * static_cast<double>(set_size) + rho2 * excess;
}

double selection_objective(const std::vector<CalibrationRecord>& records, const Lambda& lambda,
                           const CalibrationSettings& settings, double judge_scale) {
  if (records.empty()) throw DomainError("selection_objective: no records");
  double sum = 0.0;
  for (const auto& r : records) {
    Replay rep = replay_record(r, lambda, settings, judge_scale);
    sum += objective_term(rep.set_size, rep.draws, r.first_correct, settings.rho1, settings.rho2);
  }
  return sum / static_cast<double>(records.size());
}

double test_risk(const std::vector<CalibrationRecord>& records, const Lambda& lambda,
                 const CalibrationSettings& settings, double judge_scale) {
  std::vector<int> losses;
  for (const auto& r : records) losses.push_back(replay_record(r, lambda, settings, judge_scale).loss);
  return empirical_risk(losses);
}

// ---- calibration -----------------------------------------------------------------

double CalibrationResult::pvalue_at(const LambdaGrid& grid, std::size_t grid_index,
                                    std::size_t eps_index) const {
  std::size_t pair = grid_index / grid.axis3.size();
  return cdf.at(eps_index).at(loss_counts.at(pair));
}

CalibrationResult calibrate(const std::vector<CalibrationRecord>& records,
                            const CalibrationSettings& settings) {
  settings.validate();
  if (records.empty()) throw DomainError("calibrate: no calibration records");
  for (const auto& r : records) {
    if (r.samples.size() > settings.k) throw DomainError("calibrate: record exceeds budget k");
  }
  const auto& g = settings.grid;
  const std::size_t n = records.size();
  const std::size_t n3 = g.axis3.size();

  CalibrationResult res;
  res.n = n;
  res.grid_size = g.size();
  res.threshold = settings.delta / static_cast<double>(g.size());
  res.judge_scale = settings.diversity == metrics::DiversityKind::kLlmJudge
                        ? observed_judge_range(records)
                        : 1.0;
  Sweep sw = sweep(records, settings, res.judge_scale);
  res.loss_counts = sw.loss_counts;
  res.objectives = sw.objectives;
  for (double eps : settings.epsilon_grid) res.cdf.push_back(binomial_cdf_table(n, eps));

  const std::size_t pairs = res.loss_counts.size();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> eps_min(pairs, kNone);
  for (std::size_t p = 0; p < pairs; ++p) {
    for (std::size_t e = 0; e < res.cdf.size(); ++e) {
      if (res.cdf[e][res.loss_counts[p]] <= res.threshold) {
        eps_min[p] = e;
        break;
      }
    }
  }

  // p-value of a pair at the ε used for selection.
  std::function<double(std::size_t)> pval;
  std::vector<char> candidate(pairs, 0);
  std::size_t e_sel = kNone;
  if (settings.pinned_epsilon) {
    double eps = *settings.pinned_epsilon;
    pval = [&, eps](std::size_t p) { return binomial_cdf(n, eps, res.loss_counts[p]); };
    for (std::size_t p = 0; p < pairs; ++p) candidate[p] = pval(p) <= res.threshold;
  } else {
    for (std::size_t p = 0; p < pairs; ++p) e_sel = std::min(e_sel, eps_min[p]);
    std::size_t e_eval = e_sel == kNone ? res.cdf.size() - 1 : e_sel;
    pval = [&, e_eval](std::size_t p) { return res.cdf[e_eval][res.loss_counts[p]]; };
    for (std::size_t p = 0; p < pairs; ++p) candidate[p] = e_sel != kNone && eps_min[p] == e_sel;
  }

  res.valid.threshold = res.threshold;
  bool found = false;
  std::size_t best_index = 0;
  bool have_invalid = false;
  for (std::size_t p = 0; p < pairs; ++p) {
    double pv = pval(p);
    for (std::size_t i3 = 0; i3 < n3; ++i3) {
      std::size_t idx = p * n3 + i3;
      Lambda l = g.at(idx);
      if (candidate[p]) {
        res.valid.configs.emplace_back(l, pv);
        if (!found || better(res.objectives[idx], l, res.objectives[best_index], g.at(best_index))) {
          best_index = idx;
          found = true;
        }
      } else if (!have_invalid || pv < res.best_invalid_pvalue) {
        res.best_invalid = l;
        res.best_invalid_pvalue = pv;
        have_invalid = true;
      }
    }
  }
  if (!found) {
    res.ok = false;
    return res;
  }
  res.ok = true;
  res.lambda_star = g.at(best_index);
  res.valid.chosen = res.lambda_star;
  res.objective = res.objectives[best_index];
  std::size_t pair = best_index / n3;
  res.empirical_risk = static_cast<double>(res.loss_counts[pair]) / static_cast<double>(n);
  if (settings.pinned_epsilon) {
    double eps = *settings.pinned_epsilon;
    if (eps_min[pair] != kNone && settings.epsilon_grid[eps_min[pair]] <= eps) {
      eps = settings.epsilon_grid[eps_min[pair]];
    }
    res.epsilon_star = eps;
    res.pvalue = binomial_cdf(n, eps, res.loss_counts[pair]);
  } else {
    res.epsilon_star = settings.epsilon_grid[e_sel];
    res.pvalue = res.cdf[e_sel][res.loss_counts[pair]];
  }
  return res;
}

CalibrationResult refine_on_validation(const CalibrationResult& result,
                                       const std::vector<CalibrationRecord>& validation,
                                       const CalibrationSettings& settings) {
  if (!result.ok || validation.empty()) return result;
  Sweep sw = sweep(validation, settings, result.judge_scale);
  const auto& g = settings.grid;
  CalibrationResult out = result;
  bool found = false;
  std::size_t best = 0;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    Lambda l = g.at(idx);
    bool valid = std::any_of(result.valid.configs.begin(), result.valid.configs.end(),
                             [&](const auto& c) { return c.first == l; });
    if (!valid) continue;
    if (!found || better(sw.objectives[idx], l, sw.objectives[best], g.at(best))) {
      best = idx;
      found = true;
    }
  }
  if (!found) return result;
  out.lambda_star = g.at(best);
  out.valid.chosen = out.lambda_star;
  out.objective = sw.objectives[best];
  std::size_t pair = best / g.axis3.size();
  out.empirical_risk = static_cast<double>(result.loss_counts[pair]) / static_cast<double>(result.n);
  return out;
}

// ---- coverage ---------------------------------------------------------------------

double CoverageReport::violation_fraction() const {
  return trials == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(trials);
}

std::pair<double, double> CoverageReport::violation_interval(double level) const {
  if (trials == 0) return {0.0, 1.0};
  const double alpha = 1.0 - level;
  const double x = static_cast<double>(violations);
  const double nn = static_cast<double>(trials);
  double lo = 0.0, hi = 1.0;
  if (violations > 0) lo = boost::math::ibeta_inv(x, nn - x + 1.0, alpha / 2.0);
  if (violations < trials) hi = boost::math::ibeta_inv(x + 1.0, nn - x, 1.0 - alpha / 2.0);
  return {lo, hi};
}

CoverageReport coverage_trial(const RecordSource& source, const CalibrationSettings& settings,
                              std::size_t n_cal, std::size_t n_test, std::size_t trials,
                              std::uint64_t seed) {
  CoverageReport rep;
  rep.trials = trials;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t t = 0; t < trials; ++t) {
    auto cal = source(n_cal, derive_seed(seed, {t, 0}));
    auto test = source(n_test, derive_seed(seed, {t, 1}));
    CalibrationResult res = calibrate(cal, settings);
    if (!res.ok) {
      ++rep.calibration_failures;
      rep.test_risks.push_back(nan);
      rep.epsilons.push_back(nan);
      rep.lambdas.push_back(res.best_invalid);
      continue;
    }
    double risk = test_risk(test, res.lambda_star, settings, res.judge_scale);
    if (risk > res.epsilon_star) ++rep.violations;
    rep.test_risks.push_back(risk);
    rep.epsilons.push_back(res.epsilon_star);
    rep.lambdas.push_back(res.lambda_star);
  }
  return rep;
}

}  // namespace clmasp::conformal
