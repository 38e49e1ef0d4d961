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
#include <cstdint>
#include <string>
#include <vector>

namespace clmasp::asp {

struct Term {
  enum class Kind {
    kSymbol,     // lowercase constant
    kString,
    kInteger,
    kVariable,
    kAnonymous,
    kUnary,      // op '-' ; args[0]
    kBinary,     // op in + - * / \ ; args[0], args[1]
    kInterval,   // args[0] .. args[1]
    kFunction,   // name(args...)
  };

  Kind kind = Kind::kInteger;
  std::string name;        // symbol, string, variable or function name
  std::int64_t number = 0;
  char op = 0;
  std::vector<Term> args;

  static Term symbol(std::string n) { return {Kind::kSymbol, std::move(n), 0, 0, {}}; }
  static Term string(std::string s) { return {Kind::kString, std::move(s), 0, 0, {}}; }
  static Term integer(std::int64_t v) { return {Kind::kInteger, {}, v, 0, {}}; }
  static Term variable(std::string n) { return {Kind::kVariable, std::move(n), 0, 0, {}}; }
  static Term anonymous() { return {Kind::kAnonymous, "_", 0, 0, {}}; }
  static Term unary(char op, Term t) {
    Term r{Kind::kUnary, {}, 0, op, {}};
    r.args.push_back(std::move(t));
    return r;
  }
  static Term binary(char op, Term a, Term b) {
    Term r{Kind::kBinary, {}, 0, op, {}};
    r.args.push_back(std::move(a));
    r.args.push_back(std::move(b));
    return r;
  }
  static Term interval(Term lo, Term hi) {
    Term r{Kind::kInterval, {}, 0, 0, {}};
    r.args.push_back(std::move(lo));
    r.args.push_back(std::move(hi));
    return r;
  }

  bool operator==(const Term&) const = default;
};

// `p(a, b; c, d)` has two argument tuples in `pool`; a plain atom has one
// (possibly empty) tuple.
struct Atom {
  std::string predicate;
  std::vector<std::vector<Term>> pool{{}};

  bool pooled() const { return pool.size() > 1; }
  std::size_t arity() const { return pool.front().size(); }

  bool operator==(const Atom&) const = default;
};

enum class CmpOp { kEq, kNeq, kLt, kLe, kGt, kGe };

struct Comparison {
  CmpOp op = CmpOp::kEq;
  Term lhs;
  Term rhs;

  bool operator==(const Comparison&) const = default;
};

struct Literal {
  enum class Kind { kAtom, kComparison };
  Kind kind = Kind::kAtom;
  bool negated = false;  // `not` prefix, atoms only
  Atom atom;
  Comparison comparison;

  bool operator==(const Literal&) const = default;
};

// A body element is a literal optionally guarded by a condition:
// `Ox=-1 : X<0` has literal `Ox=-1` and condition `[X<0]`.
struct BodyElement {
  Literal literal;
  std::vector<Literal> condition;

  bool conditional() const { return !condition.empty(); }
  bool operator==(const BodyElement&) const = default;
};

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Head semantics: zero atoms is an integrity constraint, one atom a normal
// rule or fact, several atoms a disjunction (`,`, `;` or `|` separated).
struct Rule {
  std::vector<Atom> head;
  std::vector<BodyElement> body;
  SourceSpan span;  // not part of structural equality

  bool is_fact() const { return head.size() == 1 && body.empty(); }
  bool is_constraint() const { return head.empty(); }
  bool is_disjunctive() const { return head.size() > 1; }

  bool operator==(const Rule& other) const {
    return head == other.head && body == other.body;
  }
};

struct Program {
  std::vector<Rule> rules;
  // `#show` and similar directives are accepted and kept verbatim; they have
  // no effect on evaluation.
  std::vector<std::string> directives;

  bool operator==(const Program& other) const {
    return rules == other.rules && directives == other.directives;
  }
};

std::string render(const Term& term);
std::string render(const Atom& atom);
std::string render(const Literal& literal);
std::string render(const Rule& rule);
std::string render(const Program& program);

}  // namespace clmasp::asp
