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

#include "clmasp/stepgame.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <regex>
#include <unordered_map>

#include <json.hpp>

#include "clmasp/assets.hpp"

namespace clmasp::stepgame {

using nlohmann::json;

namespace {

struct RelationInfo {
  Relation rel;
  std::string_view name;
  Offset off;
};

constexpr std::array<RelationInfo, 9> kInfo = {{
    {Relation::kRight, "right", {1, 0}},
    {Relation::kTopRight, "top_right", {1, 1}},
    {Relation::kTop, "top", {0, 1}},
    {Relation::kTopLeft, "top_left", {-1, 1}},
    {Relation::kLeft, "left", {-1, 0}},
    {Relation::kDownLeft, "down_left", {-1, -1}},
    {Relation::kDown, "down", {0, -1}},
    {Relation::kDownRight, "down_right", {1, -1}},
    {Relation::kOverlap, "overlap", {0, 0}},
}};

int sign(long v) { return (v > 0) - (v < 0); }

}  // namespace

Offset offset(Relation r) { return kInfo[static_cast<std::size_t>(r)].off; }

std::string_view name(Relation r) { return kInfo[static_cast<std::size_t>(r)].name; }

Relation relation_from_signs(int dx, int dy) {
  for (const auto& info : kInfo) {
    if (info.off.dx == sign(dx) && info.off.dy == sign(dy)) return info.rel;
  }
  return Relation::kOverlap;
}

Relation inverse(Relation r) {
  Offset o = offset(r);
  return relation_from_signs(-o.dx, -o.dy);
}

std::optional<Relation> relation_from_name(std::string_view n) {
  for (const auto& info : kInfo) {
    if (info.name == n) return info.rel;
  }
  if (n == "bottom") return Relation::kDown;
  if (n == "bottom_left") return Relation::kDownLeft;
  if (n == "bottom_right") return Relation::kDownRight;
  return std::nullopt;
}

// ---- templates ------------------------------------------------------------

const TemplateTable& TemplateTable::builtin() {
  static const TemplateTable table = from_json(assets::stepgame_templates());
  return table;
}

TemplateTable TemplateTable::from_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("template table: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("template table must be a JSON object");
  std::map<Relation, std::vector<std::string>> out;
  for (const auto& [key, value] : doc.items()) {
    auto rel = relation_from_name(key);
    if (!rel) throw ConfigError("template table: unknown relation '" + key + "'");
    if (!value.is_array()) throw ConfigError("template table: '" + key + "' must be a list");
    for (const auto& t : value) out[*rel].push_back(t.get<std::string>());
  }
  return TemplateTable(std::move(out));
}

const std::vector<std::string>& TemplateTable::templates(Relation r) const {
  auto it = templates_.find(r);
  if (it == templates_.end() || it->second.empty()) {
    throw ConfigError("no template for relation " + std::string(name(r)));
  }
  return it->second;
}

std::size_t TemplateTable::size(Relation r) const {
  auto it = templates_.find(r);
  return it == templates_.end() ? 0 : it->second.size();
}

std::string TemplateTable::render(const Edge& e, std::size_t template_index) const {
  const std::string& t = templates(e.rel).at(template_index);
  std::string out;
  out.reserve(t.size() + 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.compare(i, 3, "{A}") == 0) {
      out += e.from;
      i += 2;
    } else if (t.compare(i, 3, "{B}") == 0) {
      out += e.to;
      i += 2;
    } else {
      out += t[i];
    }
  }
  return out;
}

// ---- generation -----------------------------------------------------------

std::vector<std::string> render_story(const Entry& entry, const TemplateTable& table,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> story;
  story.reserve(entry.edges.size());
  for (const Edge& e : entry.edges) {
    std::size_t n = table.templates(e.rel).size();
    story.push_back(table.render(e, rng.index(n)));
  }
  return story;
}

Relation oracle_answer(const std::vector<Edge>& edges, const Query& query) {
  std::unordered_map<std::string, std::vector<std::size_t>> incident;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    incident[edges[i].from].push_back(i);
    incident[edges[i].to].push_back(i);
  }
  if (query.first == query.second && incident.count(query.first)) return Relation::kOverlap;
  std::unordered_map<std::string, std::pair<long, long>> pos;
  pos[query.second] = {0, 0};
  std::vector<std::string> work{query.second};
  while (!work.empty()) {
    std::string node = std::move(work.back());
    work.pop_back();
    auto [x, y] = pos[node];
    for (std::size_t i : incident[node]) {
      const Edge& e = edges[i];
      Offset o = offset(e.rel);
      // e.from sits at e.to + offset(rel).
      bool forward = e.to == node;
      const std::string& other = forward ? e.from : e.to;
      std::pair<long, long> p = forward ? std::pair<long, long>{x + o.dx, y + o.dy}
                                        : std::pair<long, long>{x - o.dx, y - o.dy};
      auto it = pos.find(other);
      if (it == pos.end()) {
        pos.emplace(other, p);
        work.push_back(other);
      } else if (it->second != p) {
        throw DomainError("inconsistent coordinates for agent " + other);
      }
    }
  }
  auto it = pos.find(query.first);
  if (it == pos.end()) {
    throw DomainError("agents " + query.first + " and " + query.second + " are not connected");
  }
  return relation_from_signs(static_cast<int>(sign(it->second.first)),
                             static_cast<int>(sign(it->second.second)));
}

std::string fact_for(const Edge& e) {
  return std::string(name(e.rel)) + "(\"" + e.from + "\", \"" + e.to + "\").";
}

std::string query_fact(const Query& q) {
  return "query(\"" + q.first + "\", \"" + q.second + "\").";
}

std::string_view rule_block() {
  static const std::string block = [] {
    std::string_view prompt = assets::two_plus_four_prompt();
    std::size_t begin = prompt.find("location(Q2, 0, 0)");
    std::size_t end = prompt.find("\nExample 2:", begin);
    std::string text(prompt.substr(begin, end - begin));
    // The exemplar block has no is-rule for overlap facts; without it an
    // overlap edge never propagates a location.
    const std::string anchor = "is(A, down_right, B) :- down_right(A, B).\n";
    text.insert(text.find(anchor) + anchor.size(), "is(A, overlap, B) :- overlap(A, B).\n");
    return text;
  }();
  return block;
}

std::string gold_program(const Entry& entry) {
  std::string out;
  for (const auto& f : entry.gold_facts) {
    out += f;
    out += "\n\n";
  }
  out += rule_block();
  out += '\n';
  return out;
}

Entry generate_entry(int hops, std::uint64_t seed, const GenerationOptions& options,
                     std::string id) {
  if (hops < kMinHops || hops > kMaxHops) {
    throw DomainError("hops must be within [1, 24], got " + std::to_string(hops));
  }
  Rng rng(seed);
  std::vector<std::string> letters;
  for (char c = 'A'; c <= 'Z'; ++c) letters.emplace_back(1, c);
  rng.shuffle(letters);
  letters.resize(static_cast<std::size_t>(hops) + 1);

  Entry e;
  e.id = id.empty() ? "h" + std::to_string(hops) + "-" + std::to_string(seed) : std::move(id);
  e.hops = hops;
  for (int i = 0; i < hops; ++i) {
    Relation rel = kAllRelations[rng.index(kAllRelations.size())];
    const std::string& a = letters[static_cast<std::size_t>(i)];
    const std::string& b = letters[static_cast<std::size_t>(i) + 1];
    if (rng.bernoulli(0.5)) {
      e.edges.push_back({a, b, rel});
    } else {
      e.edges.push_back({b, a, rel});
    }
  }
  if (rng.bernoulli(0.5)) {
    e.query = {letters.front(), letters.back()};
  } else {
    e.query = {letters.back(), letters.front()};
  }
  if (options.shuffle_sentences) rng.shuffle(e.edges);
  const TemplateTable& table = options.templates ? *options.templates : TemplateTable::builtin();
  e.story = render_story(e, table, rng.next());
  e.gold_answer = oracle_answer(e.edges, e.query);
  for (const Edge& edge : e.edges) e.gold_facts.push_back(fact_for(edge));
  e.gold_facts.push_back(query_fact(e.query));
  return e;
}

std::pair<std::vector<Edge>, Query> edges_from_facts(const std::vector<std::string>& facts) {
  static const std::regex re(R"re(^\s*([a-z_]+)\("([^"]+)",\s*"([^"]+)"\)\.\s*$)re");
  std::vector<Edge> edges;
  std::optional<Query> query;
  for (const auto& f : facts) {
    std::smatch m;
    if (!std::regex_match(f, m, re)) throw ConfigError("malformed gold fact: " + f);
    if (m[1] == "query") {
      query = Query{m[2], m[3]};
      continue;
    }
    auto rel = relation_from_name(m[1].str());
    if (!rel) throw ConfigError("unknown relation in gold fact: " + f);
    edges.push_back({m[2], m[3], *rel});
  }
  if (!query) throw ConfigError("gold facts lack a query fact");
  return {std::move(edges), std::move(*query)};
}

// ---- splits ---------------------------------------------------------------

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::kTrain: return "train";
    case SplitName::kValidation: return "validation";
    case SplitName::kTest: return "test";
  }
  return "?";
}

HopMix uniform_hop_mix(int lo, int hi) {
  HopMix mix;
  for (int h = lo; h <= hi; ++h) mix[h] = 1.0;
  return mix;
}

std::map<int, std::size_t> SplitPlan::hop_distribution(SplitName s) const {
  std::map<int, std::size_t> out;
  for (int h : hops[static_cast<std::size_t>(s)]) ++out[h];
  return out;
}

Entry SplitPlan::entry_for(SplitName s, std::size_t index) const {
  int h = hops[static_cast<std::size_t>(s)].at(index);
  char id[64];
  std::snprintf(id, sizeof id, "%s-%06zu", std::string(split_name(s)).c_str(), index);
  return generate_entry(h, derive_seed(seed, {static_cast<std::uint64_t>(s), index, 1}), options,
                        id);
}

SplitPlan plan_splits(const SplitSizes& sizes, const HopMix& mix_in, std::uint64_t seed,
                      const GenerationOptions& options) {
  HopMix mix = mix_in.empty() ? uniform_hop_mix() : mix_in;
  std::vector<std::pair<int, double>> cumulative;
  double total = 0.0;
  for (const auto& [h, w] : mix) {
    if (h < kMinHops || h > kMaxHops) {
      throw ConfigError("hop mix entry out of range: " + std::to_string(h));
    }
    if (!(w >= 0.0)) throw ConfigError("hop mix weights must be non-negative");
    if (w == 0.0) continue;
    total += w;
    cumulative.emplace_back(h, total);
  }
  if (cumulative.empty()) throw ConfigError("hop mix has no positive weight");

  SplitPlan plan;
  plan.seed = seed;
  plan.options = options;
  const std::array<std::size_t, 3> counts = {sizes.train, sizes.validation, sizes.test};
  for (std::size_t s = 0; s < 3; ++s) {
    auto& out = plan.hops[s];
    out.reserve(counts[s]);
    Rng rng(derive_seed(seed, {s, 0}));
    for (std::size_t i = 0; i < counts[s]; ++i) {
      double u = rng.uniform() * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u,
                                 [](double v, const auto& c) { return v < c.second; });
      if (it == cumulative.end()) --it;
      out.push_back(it->first);
    }
  }
  return plan;
}

std::array<DatasetSplit, 3> build_splits(const SplitSizes& sizes, const HopMix& mix,
                                         std::uint64_t seed, const GenerationOptions& options) {
  SplitPlan plan = plan_splits(sizes, mix, seed, options);
  std::array<DatasetSplit, 3> out;
  for (std::size_t s = 0; s < 3; ++s) {
    auto name = static_cast<SplitName>(s);
    out[s].name = name;
    out[s].entries.reserve(plan.hops[s].size());
    for (std::size_t i = 0; i < plan.hops[s].size(); ++i) {
      out[s].entries.push_back(plan.entry_for(name, i));
    }
    out[s].hop_distribution = plan.hop_distribution(name);
  }
  return out;
}

std::vector<Entry> sample_test_slice(const DatasetSplit& split, int hops, std::size_t n,
                                     std::uint64_t seed) {
  if (n == 0) return {};
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < split.entries.size(); ++i) {
    if (split.entries[i].hops == hops) pool.push_back(i);
  }
  if (pool.size() < n) {
    throw DomainError("split " + std::string(split_name(split.name)) + " has " +
                      std::to_string(pool.size()) + " entries with " + std::to_string(hops) +
                      " hops, " + std::to_string(n) + " requested");
  }
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(hops)}));
  std::vector<Entry> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(split.entries[pool[i]]);
  }
  return out;
}

// ---- JSONL ----------------------------------------------------------------

std::string to_jsonl(const Entry& e) {
  json j;
  j["id"] = e.id;
  j["hops"] = e.hops;
  j["story"] = e.story;
  j["query"] = {e.query.first, e.query.second};
  j["answer"] = std::string(name(e.gold_answer));
  j["gold_facts"] = e.gold_facts;
  return j.dump();
}

Entry entry_from_jsonl(std::string_view line) {
  try {
    json j = json::parse(line);
    Entry e;
    e.id = j.at("id").get<std::string>();
    e.hops = j.at("hops").get<int>();
    e.story = j.at("story").get<std::vector<std::string>>();
    const auto& q = j.at("query");
    e.query = {q.at(0).get<std::string>(), q.at(1).get<std::string>()};
    auto rel = relation_from_name(j.at("answer").get<std::string>());
    if (!rel) throw ConfigError("unknown answer relation");
    e.gold_answer = *rel;
    e.gold_facts = j.at("gold_facts").get<std::vector<std::string>>();
    auto [edges, query] = edges_from_facts(e.gold_facts);
    e.edges = std::move(edges);
    if (!(query == e.query)) throw ConfigError("query field disagrees with query fact");
    if (static_cast<int>(e.edges.size()) != e.hops || e.story.size() != e.edges.size()) {
      throw ConfigError("entry " + e.id + ": hops, story and facts disagree");
    }
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed dataset line: ") + ex.what());
  }
}

void write_jsonl(std::ostream& out, const std::vector<Entry>& entries) {
  for (const auto& e : entries) out << to_jsonl(e) << '\n';
}

std::vector<Entry> read_jsonl(std::istream& in) {
  std::vector<Entry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(entry_from_jsonl(line));
  }
  return out;
}

}  // namespace clmasp::stepgame
