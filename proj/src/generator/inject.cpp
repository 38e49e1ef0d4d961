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
#include <regex>
#include <string>
#include <vector>

#include "clmasp/generator.hpp"
#include "clmasp/random.hpp"

namespace clmasp::generator {

using stepgame::Edge;
using stepgame::Relation;

namespace {

struct FactLine {
  std::size_t line;
  Edge edge;
};

struct Parsed {
  std::vector<std::string> lines;
  std::vector<FactLine> edges;
  std::size_t query_line = 0;
  stepgame::Query query;
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

Parsed parse_gold(const std::string& text) {
  static const std::regex kFact(R"re(^(\w+)\("([^"]+)", "([^"]+)"\)\.\s*$)re");
  Parsed p;
  p.lines = split_lines(text);
  bool have_query = false;
  for (std::size_t i = 0; i < p.lines.size(); ++i) {
    std::smatch m;
    if (!std::regex_match(p.lines[i], m, kFact)) continue;
    if (m[1] == "query") {
      p.query = {m[2], m[3]};
      p.query_line = i;
      have_query = true;
      continue;
    }
    auto rel = stepgame::relation_from_name(m[1].str());
    if (!rel) continue;
    p.edges.push_back({i, Edge{m[2], m[3], *rel}});
  }
  if (p.edges.empty() || !have_query) {
    throw ConfigError("inject_error: gold program lacks edge or query facts");
  }
  return p;
}

std::string fact_text(const std::string& rel, const Edge& e) {
  return rel + "(\"" + e.from + "\", \"" + e.to + "\")";
}

std::vector<Edge> edges_of(const Parsed& p) {
  std::vector<Edge> out;
  for (const auto& f : p.edges) out.push_back(f.edge);
  return out;
}

std::vector<std::size_t> order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  return idx;
}

// Relations whose offset differs from r's in exactly one coordinate by one.
std::vector<Relation> adjacent(Relation r) {
  std::vector<Relation> out;
  auto o = stepgame::offset(r);
  for (Relation x : stepgame::kAllRelations) {
    auto q = stepgame::offset(x);
    int d = std::abs(q.dx - o.dx) + std::abs(q.dy - o.dy);
    if (d == 1) out.push_back(x);
  }
  return out;
}

std::vector<Relation> others(Relation r) {
  std::vector<Relation> out;
  for (Relation x : stepgame::kAllRelations) {
    if (x != r) out.push_back(x);
  }
  return out;
}

std::string typo(const std::string& name, Rng& rng) {
  std::vector<std::size_t> spots;
  for (std::size_t i = 0; i + 1 < name.size(); ++i) {
    if (name[i] != name[i + 1] && name[i] != '_' && name[i + 1] != '_') spots.push_back(i);
  }
  std::string out = name;
  std::size_t i = spots[rng.index(spots.size())];
  std::swap(out[i], out[i + 1]);
  return out;
}

std::size_t rule_line_for(const Parsed& p, Relation r) {
  std::string n(stepgame::name(r));
  std::string want = "is(A, " + n + ", B) :- " + n + "(A, B).";
  for (std::size_t i = 0; i < p.lines.size(); ++i) {
    if (p.lines[i] == want) return i;
  }
  throw ConfigError("inject_error: no rule for relation " + n);
}

const std::vector<std::string>& gibberish_tails() {
  static const std::vector<std::string> kTails = {
      "I hope this helps you with the spatial reasoning problem.",
      "Note that the program above can be run with any ASP solver to get the answer.",
      "This program encodes each sentence as a fact and then derives the answer.",
  };
  return kTails;
}

std::string describe(Relation r) {
  switch (r) {
    case Relation::kRight: return "to the right of";
    case Relation::kTopRight: return "to the upper right of";
    case Relation::kTop: return "above";
    case Relation::kTopLeft: return "to the upper left of";
    case Relation::kLeft: return "to the left of";
    case Relation::kDownLeft: return "to the lower left of";
    case Relation::kDown: return "below";
    case Relation::kDownRight: return "to the lower right of";
    case Relation::kOverlap: return "in the same place as";
  }
  return "near";
}

}  // namespace

std::string_view error_class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::kWrongArityFact: return "WrongArityFact";
    case ErrorClass::kRuleTypo: return "RuleTypo";
    case ErrorClass::kGibberishTail: return "GibberishTail";
    case ErrorClass::kNaturalLanguageOnly: return "NaturalLanguageOnly";
    case ErrorClass::kMissingAnswerFactError: return "MissingAnswerFactError";
    case ErrorClass::kMultiAnswerRule: return "MultiAnswerRule";
    case ErrorClass::kWrongRelationFact: return "WrongRelationFact";
    case ErrorClass::kCommaDisjunctionFact: return "CommaDisjunctionFact";
    case ErrorClass::kIncompleteTrailingLine: return "IncompleteTrailingLine";
  }
  return "?";
}

ErrorClass error_class_from_name(std::string_view name) {
  for (ErrorClass c : kAllErrorClasses) {
    if (error_class_name(c) == name) return c;
  }
  throw ConfigError("unknown error class: " + std::string(name));
}

asp::OutcomeKind expected_outcome(ErrorClass c) {
  using asp::OutcomeKind;
  switch (c) {
    case ErrorClass::kWrongArityFact:
    case ErrorClass::kRuleTypo:
    case ErrorClass::kMissingAnswerFactError: return OutcomeKind::kNoAnswerAtom;
    case ErrorClass::kGibberishTail:
    case ErrorClass::kNaturalLanguageOnly: return OutcomeKind::kEmpty;
    case ErrorClass::kMultiAnswerRule: return OutcomeKind::kMultipleAnswerAtoms;
    case ErrorClass::kWrongRelationFact: return OutcomeKind::kSingleWrong;
    case ErrorClass::kCommaDisjunctionFact: return OutcomeKind::kMultipleAnswerSets;
    case ErrorClass::kIncompleteTrailingLine: return OutcomeKind::kSingleCorrect;
  }
  return OutcomeKind::kEmpty;
}

bool syntax_invalid(ErrorClass c) {
  return c == ErrorClass::kGibberishTail || c == ErrorClass::kNaturalLanguageOnly;
}

std::string inject_error(const std::string& gold_text, ErrorClass c, std::uint64_t seed) {
  Parsed p = parse_gold(gold_text);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
  const Relation answer = stepgame::oracle_answer(edges_of(p), p.query);
  auto& lines = p.lines;
  const FactLine& pick = p.edges[rng.index(p.edges.size())];

  switch (c) {
    case ErrorClass::kWrongArityFact:
      lines[pick.line] = "at(\"" + pick.edge.from + "\", \"" + pick.edge.to + "\", " +
                         std::to_string(1 + rng.index(9)) + ").";
      break;

    case ErrorClass::kMissingAnswerFactError:
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(p.query_line));
      if (p.query_line < lines.size() && lines[p.query_line].empty()) {
        lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(p.query_line));
      }
      break;

    case ErrorClass::kRuleTypo: {
      std::size_t at = rule_line_for(p, pick.edge.rel);
      std::string n(stepgame::name(pick.edge.rel));
      lines[at] = "is(A, " + n + ", B) :- " + typo(n, rng) + "(A, B).";
      break;
    }

    case ErrorClass::kGibberishTail: {
      const auto& tails = gibberish_tails();
      if (!lines.empty() && lines.back().empty()) lines.pop_back();
      lines.push_back(tails[rng.index(tails.size())]);
      break;
    }

    case ErrorClass::kNaturalLanguageOnly: {
      std::string a = p.query.first, b = p.query.second, d = describe(answer);
      std::vector<std::string> prose = {
          "The agent " + a + " is " + d + " the agent " + b + ".",
          "Based on the story, " + a + " is " + d + " " + b + ".",
          "Following the sentences one by one, " + a + " ends up " + d + " " + b +
              ", so that is the answer.",
      };
      return prose[rng.index(prose.size())];
    }

    case ErrorClass::kMultiAnswerRule: {
      Relation r = pick.edge.rel;
      auto alts = others(r);
      Relation alt = alts[rng.index(alts.size())];
      std::size_t at = rule_line_for(p, r);
      lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at) + 1,
                   "is(A, " + std::string(stepgame::name(alt)) + ", B) :- " +
                       std::string(stepgame::name(r)) + "(A, B).");
      break;
    }

    case ErrorClass::kWrongRelationFact: {
      std::vector<Edge> edges = edges_of(p);
      bool done = false;
      for (std::size_t i : order(edges.size(), rng)) {
        auto cand = adjacent(edges[i].rel);
        rng.shuffle(cand);
        for (Relation r : cand) {
          auto trial = edges;
          trial[i].rel = r;
          if (stepgame::oracle_answer(trial, p.query) != answer) {
            edges = trial;
            done = true;
            break;
          }
        }
        if (done) break;
      }
      // Far-from-origin chains: invert edges until the direction flips.
      for (std::size_t i : order(edges.size(), rng)) {
        if (done) break;
        edges[i].rel = stepgame::inverse(edges[i].rel);
        done = stepgame::oracle_answer(edges, p.query) != answer;
      }
      if (!done) throw ConfigError("inject_error: could not change the answer");
      for (std::size_t i = 0; i < edges.size(); ++i) {
        lines[p.edges[i].line] = fact_text(std::string(stepgame::name(edges[i].rel)), edges[i]) + ".";
      }
      break;
    }

    case ErrorClass::kCommaDisjunctionFact: {
      auto alts = others(pick.edge.rel);
      Relation alt = alts[rng.index(alts.size())];
      lines[pick.line] = fact_text(std::string(stepgame::name(pick.edge.rel)), pick.edge) + ", " +
                         fact_text(std::string(stepgame::name(alt)), pick.edge) + ".";
      break;
    }

    case ErrorClass::kIncompleteTrailingLine: {
      static const std::vector<std::string> kCuts = {
          "location(B, Xb,",
          "is(A, R1, B) :- is(B, R2",
          "answer(R) :- query(Q1, _), location(Q1, X",
      };
      if (!lines.empty() && lines.back().empty()) lines.pop_back();
      lines.push_back(kCuts[rng.index(kCuts.size())]);
      break;
    }
  }
  return join_lines(lines);
}

}  // namespace clmasp::generator
