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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "clmasp/asp/ast.hpp"
#include "clmasp/asp/grounder.hpp"

namespace clmasp::asp {

// A stable model, atoms sorted by their textual form.
struct AnswerSet {
  std::vector<GroundAtom> atoms;

  bool contains(std::string_view atom_text) const;
  std::vector<const GroundAtom*> with_predicate(std::string_view name, std::size_t arity) const;
  bool operator==(const AnswerSet&) const = default;
};

struct SolveStats {
  std::size_t ground_atoms = 0;
  std::size_t ground_rules = 0;
  std::size_t iterations = 0;
  std::size_t candidates = 0;  // leaves reached while branching
  bool truncated = false;      // branch cap hit; enumeration is partial
};

struct SolveResult {
  std::vector<AnswerSet> answer_sets;
  SolveStats stats;
};

// All answer sets of a positive (possibly disjunctive) program with integrity
// constraints. Disjunction-free programs have exactly one answer set (the
// least model) unless a constraint eliminates it. Throws SolveError.
SolveResult solve(const Program& program, const Limits& limits = {});
SolveResult solve(const GroundProgram& ground, const Limits& limits = {});

// Runs an external solver binary with the program on stdin, requesting all
// models (`<exe> 0`), and parses the `Answer: N` blocks it prints. Intended
// for differential testing only. Throws std::runtime_error on failure.
SolveResult solve_external(std::string_view program_text, const std::string& executable);

}  // namespace clmasp::asp
