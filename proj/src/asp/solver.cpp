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

#include "clmasp/asp/solver.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "clmasp/asp/lexer.hpp"
#include "clmasp/asp/parser.hpp"

namespace clmasp::asp {

bool AnswerSet::contains(std::string_view atom_text) const {
  return std::any_of(atoms.begin(), atoms.end(),
                     [&](const GroundAtom& a) { return a.to_string() == atom_text; });
}

std::vector<const GroundAtom*> AnswerSet::with_predicate(std::string_view name,
                                                         std::size_t arity) const {
  std::vector<const GroundAtom*> out;
  for (const auto& a : atoms) {
    if (a.predicate == name && a.args.size() == arity) out.push_back(&a);
  }
  return out;
}

namespace {

class ModelSearch {
 public:
  ModelSearch(const GroundProgram& g, const Limits& limits) : g_(g), limits_(limits) {
    watches_.resize(g.atoms.size());
    for (std::uint32_t r = 0; r < g.rules.size(); ++r) {
      for (std::uint32_t a : g.rules[r].body) watches_[a].push_back(r);
      if (g.rules[r].head.size() > 1) disjunctive_.push_back(r);
      if (g.rules[r].head.empty()) constraints_.push_back(r);
    }
  }

  SolveResult run() {
    SolveResult result;
    std::vector<std::vector<std::uint32_t>> candidates;
    std::vector<std::vector<std::uint32_t>> stack{{}};
    while (!stack.empty()) {
      std::vector<std::uint32_t> chosen = std::move(stack.back());
      stack.pop_back();
      least_model(chosen);
      int open = first_unsatisfied_disjunction();
      if (open < 0) {
        std::vector<std::uint32_t> model;
        for (std::uint32_t a = 0; a < truth_.size(); ++a) {
          if (truth_[a]) model.push_back(a);
        }
        candidates.push_back(std::move(model));
        if (candidates.size() >= limits_.max_branches && !stack.empty()) {
          result.stats.truncated = true;
          break;
        }
        continue;
      }
      const auto& head = g_.rules[static_cast<std::size_t>(open)].head;
      // Push in reverse so the first disjunct is explored first.
      for (auto it = head.rbegin(); it != head.rend(); ++it) {
        auto next = chosen;
        next.push_back(*it);
        stack.push_back(std::move(next));
      }
    }
    result.stats.candidates = candidates.size();

    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<AnswerSet> sets;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      bool minimal = true;
      for (std::size_t j = 0; j < candidates.size() && minimal; ++j) {
        if (i != j && candidates[j].size() < candidates[i].size() &&
            std::includes(candidates[i].begin(), candidates[i].end(), candidates[j].begin(),
                          candidates[j].end())) {
          minimal = false;
        }
      }
      if (!minimal || violates_constraint(candidates[i])) continue;
      AnswerSet s;
      for (std::uint32_t a : candidates[i]) s.atoms.push_back(g_.atoms[a]);
      std::vector<std::string> keys;
      keys.reserve(s.atoms.size());
      std::vector<std::size_t> order(s.atoms.size());
      for (std::size_t k = 0; k < s.atoms.size(); ++k) {
        keys.push_back(s.atoms[k].to_string());
        order[k] = k;
      }
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return keys[x] < keys[y]; });
      AnswerSet sorted;
      sorted.atoms.reserve(order.size());
      for (std::size_t k : order) sorted.atoms.push_back(std::move(s.atoms[k]));
      sets.push_back(std::move(sorted));
    }
    std::sort(sets.begin(), sets.end(), [](const AnswerSet& a, const AnswerSet& b) {
      return std::lexicographical_compare(
          a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
          [](const GroundAtom& x, const GroundAtom& y) { return x.to_string() < y.to_string(); });
    });
    result.answer_sets = std::move(sets);
    result.stats.ground_atoms = g_.atoms.size();
    result.stats.ground_rules = g_.rules.size();
    result.stats.iterations = g_.iterations;
    return result;
  }

 private:
  void set_true(std::uint32_t a) {
    if (truth_[a]) return;
    truth_[a] = 1;
    queue_.push_back(a);
  }

  void least_model(const std::vector<std::uint32_t>& chosen) {
    truth_.assign(g_.atoms.size(), 0);
    counters_.resize(g_.rules.size());
    queue_.clear();
    for (std::uint32_t r = 0; r < g_.rules.size(); ++r) {
      counters_[r] = static_cast<std::uint32_t>(g_.rules[r].body.size());
      if (counters_[r] == 0 && g_.rules[r].head.size() == 1) set_true(g_.rules[r].head[0]);
    }
    for (std::uint32_t a : chosen) set_true(a);
    for (std::size_t q = 0; q < queue_.size(); ++q) {
      for (std::uint32_t r : watches_[queue_[q]]) {
        if (--counters_[r] == 0 && g_.rules[r].head.size() == 1) set_true(g_.rules[r].head[0]);
      }
    }
  }

  int first_unsatisfied_disjunction() const {
    for (std::uint32_t r : disjunctive_) {
      if (counters_[r] != 0) continue;
      const auto& head = g_.rules[r].head;
      if (std::none_of(head.begin(), head.end(), [&](std::uint32_t a) { return truth_[a]; })) {
        return static_cast<int>(r);
      }
    }
    return -1;
  }

  bool violates_constraint(const std::vector<std::uint32_t>& model) const {
    for (std::uint32_t r : constraints_) {
      const auto& body = g_.rules[r].body;
      if (std::all_of(body.begin(), body.end(), [&](std::uint32_t a) {
            return std::binary_search(model.begin(), model.end(), a);
          })) {
        return true;
      }
    }
    return false;
  }

  const GroundProgram& g_;
  Limits limits_;
  std::vector<std::vector<std::uint32_t>> watches_;
  std::vector<std::uint32_t> disjunctive_;
  std::vector<std::uint32_t> constraints_;
  std::vector<char> truth_;
  std::vector<std::uint32_t> counters_;
  std::vector<std::uint32_t> queue_;
};

Symbol ground_symbol(const Term& t) {
  Symbol s;
  switch (t.kind) {
    case Term::Kind::kInteger:
      s.kind = Symbol::Kind::kInteger;
      s.number = t.number;
      return s;
    case Term::Kind::kSymbol:
      s.kind = Symbol::Kind::kConstant;
      s.text = t.name;
      return s;
    case Term::Kind::kString:
      s.kind = Symbol::Kind::kString;
      s.text = t.name;
      return s;
    default:
      throw std::runtime_error("external solver printed a non-ground or compound term");
  }
}

// Splits one line of solver output into ground atoms.
std::vector<GroundAtom> parse_atom_line(const std::string& line) {
  std::vector<GroundAtom> out;
  std::vector<Token> toks = tokenize(line);
  int depth = 0;
  std::size_t start = std::string::npos;
  auto flush = [&](std::size_t end) {
    if (start == std::string::npos) return;
    Program p = parse(line.substr(start, end - start) + ".");
    const Atom& a = p.rules.at(0).head.at(0);
    GroundAtom g;
    g.predicate = a.predicate;
    for (const Term& t : a.pool.front()) g.args.push_back(ground_symbol(t));
    out.push_back(std::move(g));
    start = std::string::npos;
  };
  for (const Token& t : toks) {
    if (t.kind == TokenKind::kEnd) {
      flush(line.size());
      break;
    }
    if (depth == 0 && t.kind == TokenKind::kIdentifier) {
      flush(t.offset);
      start = t.offset;
    }
    if (t.kind == TokenKind::kLParen) ++depth;
    if (t.kind == TokenKind::kRParen) --depth;
  }
  return out;
}

}  // namespace

SolveResult solve(const GroundProgram& ground, const Limits& limits) {
  return ModelSearch(ground, limits).run();
}

SolveResult solve(const Program& program, const Limits& limits) {
  GroundProgram g = ground(program, limits);
  return solve(g, limits);
}

SolveResult solve_external(std::string_view program_text, const std::string& executable) {
  char path[] = "/tmp/clmasp-program-XXXXXX";
  int fd = mkstemp(path);
  if (fd < 0) throw std::runtime_error("cannot create temporary program file");
  close(fd);
  {
    std::ofstream f(path, std::ios::binary);
    f << program_text;
  }
  std::string cmd = executable + " 0 < " + path + " 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) {
    std::remove(path);
    throw std::runtime_error("cannot run external solver: " + executable);
  }
  std::string output;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe.get())) output.append(buf, n);
  pipe.reset();
  std::remove(path);

  SolveResult result;
  std::istringstream in(output);
  std::string line;
  bool expect_atoms = false;
  while (std::getline(in, line)) {
    if (line.rfind("Answer:", 0) == 0) {
      expect_atoms = true;
      continue;
    }
    if (expect_atoms) {
      AnswerSet s;
      s.atoms = parse_atom_line(line);
      std::sort(s.atoms.begin(), s.atoms.end(), [](const GroundAtom& a, const GroundAtom& b) {
        return a.to_string() < b.to_string();
      });
      result.answer_sets.push_back(std::move(s));
      expect_atoms = false;
    }
  }
  std::sort(result.answer_sets.begin(), result.answer_sets.end(),
            [](const AnswerSet& a, const AnswerSet& b) {
              return std::lexicographical_compare(
                  a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
                  [](const GroundAtom& x, const GroundAtom& y) {
                    return x.to_string() < y.to_string();
                  });
            });
  return result;
}

}  // namespace clmasp::asp
