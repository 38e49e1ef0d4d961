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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clmasp/random.hpp"

namespace clmasp::stepgame {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The nine spatial configurations. Names follow the ASP programs
// (`down_left`, not `bottom_left`).
enum class Relation : std::uint8_t {
  kRight,
  kTopRight,
  kTop,
  kTopLeft,
  kLeft,
  kDownLeft,
  kDown,
  kDownRight,
  kOverlap,
};

inline constexpr std::array<Relation, 9> kAllRelations = {
    Relation::kRight, Relation::kTopRight, Relation::kTop,
    Relation::kTopLeft, Relation::kLeft, Relation::kDownLeft,
    Relation::kDown, Relation::kDownRight, Relation::kOverlap};

struct Offset {
  int dx = 0;
  int dy = 0;
  bool operator==(const Offset&) const = default;
};

Offset offset(Relation r);
Relation inverse(Relation r);
// Relation whose offset equals (sign(dx), sign(dy)).
Relation relation_from_signs(int dx, int dy);
std::string_view name(Relation r);
// Accepts the ASP names plus `bottom`, `bottom_left`, `bottom_right`.
std::optional<Relation> relation_from_name(std::string_view n);

struct Edge {
  std::string from;
  std::string to;
  Relation rel = Relation::kOverlap;
  bool operator==(const Edge&) const = default;
};

struct Query {
  std::string first;   // the agent asked about
  std::string second;  // the reference agent
  bool operator==(const Query&) const = default;
};

struct Entry {
  std::string id;
  int hops = 0;
  std::vector<Edge> edges;         // story order
  std::vector<std::string> story;  // one sentence per edge, same order as edges
  Query query;
  Relation gold_answer = Relation::kOverlap;
  std::vector<std::string> gold_facts;  // edge facts then the query fact

  bool operator==(const Entry&) const = default;
};

inline constexpr int kMinHops = 1;
inline constexpr int kMaxHops = 24;

// Sentence templates keyed by relation; `{A}` and `{B}` stand for the two
// agents of an edge `rel(A, B)`.
class TemplateTable {
 public:
  TemplateTable() = default;
  explicit TemplateTable(std::map<Relation, std::vector<std::string>> templates)
      : templates_(std::move(templates)) {}

  // The bundled synonym table.
  static const TemplateTable& builtin();
  static TemplateTable from_json(std::string_view json_text);

  const std::vector<std::string>& templates(Relation r) const;  // throws ConfigError
  std::string render(const Edge& e, std::size_t template_index) const;
  std::size_t size(Relation r) const;

 private:
  std::map<Relation, std::vector<std::string>> templates_;
};

struct GenerationOptions {
  bool shuffle_sentences = true;
  const TemplateTable* templates = nullptr;  // nullptr = builtin
};

// Chain of hops+1 distinct single-letter agents; edge orientations and
// relations are uniform; the query asks about one chain end relative to the
// other. Pure function of (hops, seed, options).
Entry generate_entry(int hops, std::uint64_t seed, const GenerationOptions& options = {},
                     std::string id = {});

// Coordinate propagation from the query's reference agent at the origin.
Relation oracle_answer(const std::vector<Edge>& edges, const Query& query);

std::vector<std::string> render_story(const Entry& entry, const TemplateTable& table,
                                      std::uint64_t seed);

std::string fact_for(const Edge& e);
std::string query_fact(const Query& q);
// The exemplar rule block shared by every gold program, plus an is-rule for
// overlap facts that the exemplars lack.
std::string_view rule_block();
// Edge facts, the query fact and the rule block, in the response layout of
// the in-context exemplars.
std::string gold_program(const Entry& entry);

// Parses `rel("A", "B").` / `query("A", "B").` lines back into edges.
std::pair<std::vector<Edge>, Query> edges_from_facts(const std::vector<std::string>& facts);

// ---- splits -------------------------------------------------------------

enum class SplitName { kTrain, kValidation, kTest };
std::string_view split_name(SplitName s);

struct DatasetSplit {
  SplitName name = SplitName::kTrain;
  std::vector<Entry> entries;
  std::map<int, std::size_t> hop_distribution;
};

struct SplitSizes {
  std::size_t train = 341'284;
  std::size_t validation = 11'350;
  std::size_t test = 113'341;
};

// hop -> relative weight. Empty means uniform over 1..24.
using HopMix = std::map<int, double>;
HopMix uniform_hop_mix(int lo = kMinHops, int hi = kMaxHops);

// Hop count assigned to every index of every split without materializing
// entries; `entry_for` regenerates any single entry.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::array<std::vector<int>, 3> hops;  // indexed by SplitName
  GenerationOptions options;

  std::map<int, std::size_t> hop_distribution(SplitName s) const;
  Entry entry_for(SplitName s, std::size_t index) const;
};

SplitPlan plan_splits(const SplitSizes& sizes, const HopMix& mix, std::uint64_t seed,
                      const GenerationOptions& options = {});
std::array<DatasetSplit, 3> build_splits(const SplitSizes& sizes, const HopMix& mix,
                                         std::uint64_t seed,
                                         const GenerationOptions& options = {});

// n distinct entries with the given hop count, sampled without replacement.
std::vector<Entry> sample_test_slice(const DatasetSplit& split, int hops, std::size_t n,
                                     std::uint64_t seed = 0);

// ---- JSONL --------------------------------------------------------------

std::string to_jsonl(const Entry& e);
Entry entry_from_jsonl(std::string_view line);
void write_jsonl(std::ostream& out, const std::vector<Entry>& entries);
std::vector<Entry> read_jsonl(std::istream& in);

}  // namespace clmasp::stepgame
