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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "clmasp/asp/ast.hpp"

namespace clmasp::asp {

struct Limits {
  std::size_t max_atoms = 2'000'000;
  std::size_t max_iterations = 10'000;
  std::size_t max_ground_rules = 10'000'000;
  // Interval endpoints must lie in [-integer_domain, integer_domain].
  std::int64_t integer_domain = 1'000'000;
  // Upper bound on candidate models explored when branching on disjunctions.
  std::size_t max_branches = 16;
};

class SolveError : public std::runtime_error {
 public:
  enum class Kind { kResource, kUnsafe, kUnsupported };
  SolveError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Symbol {
  enum class Kind { kInteger, kConstant, kString };
  Kind kind = Kind::kInteger;
  std::int64_t number = 0;
  std::string text;

  std::string to_string() const;
  bool operator==(const Symbol&) const = default;
  // Integers < constants < strings; otherwise by value.
  std::strong_ordering operator<=>(const Symbol& other) const;
};

struct GroundAtom {
  std::string predicate;
  std::vector<Symbol> args;

  std::string to_string() const;
  bool operator==(const GroundAtom&) const = default;
};

struct GroundRule {
  std::vector<std::uint32_t> head;  // empty = constraint, >1 = disjunction
  std::vector<std::uint32_t> body;  // positive body atoms, duplicates removed
};

struct GroundProgram {
  std::vector<GroundAtom> atoms;  // indexed by atom id
  std::vector<GroundRule> rules;
  std::size_t iterations = 0;

  std::string render(const GroundRule& rule) const;
};

// Instantiates the program bottom-up (semi-naive). Every atom that can occur
// in some model is created; all disjuncts of a disjunctive head count as
// possible. Comparisons, arithmetic and conditional literals are evaluated
// away, so ground rules only mention atoms. Throws SolveError.
GroundProgram ground(const Program& program, const Limits& limits = {});

}  // namespace clmasp::asp
