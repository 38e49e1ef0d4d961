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

#include "clmasp/asp/ast.hpp"

namespace clmasp::asp {
namespace {

int precedence(const Term& t) {
  if (t.kind != Term::Kind::kBinary) return 3;
  return (t.op == '+' || t.op == '-') ? 1 : 2;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string join_terms(const std::vector<Term>& terms) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += ", ";
    out += render(terms[i]);
  }
  return out;
}

const char* cmp_text(CmpOp op) {
  switch (op) {
    case CmpOp::kEq: return "=";
    case CmpOp::kNeq: return "!=";
    case CmpOp::kLt: return "<";
    case CmpOp::kLe: return "<=";
    case CmpOp::kGt: return ">";
    case CmpOp::kGe: return ">=";
  }
  return "?";
}

}  // namespace

std::string render(const Term& t) {
  switch (t.kind) {
    case Term::Kind::kSymbol:
    case Term::Kind::kVariable:
    case Term::Kind::kAnonymous:
      return t.name;
    case Term::Kind::kString:
      return quote(t.name);
    case Term::Kind::kInteger:
      return std::to_string(t.number);
    case Term::Kind::kUnary: {
      const Term& arg = t.args[0];
      bool wrap = arg.kind == Term::Kind::kBinary || arg.kind == Term::Kind::kInterval ||
                  arg.kind == Term::Kind::kUnary ||
                  (arg.kind == Term::Kind::kInteger && arg.number < 0);
      return wrap ? "-(" + render(arg) + ")" : "-" + render(arg);
    }
    case Term::Kind::kBinary: {
      const Term& a = t.args[0];
      const Term& b = t.args[1];
      int p = precedence(t);
      std::string left = precedence(a) < p || a.kind == Term::Kind::kInterval
                             ? "(" + render(a) + ")"
                             : render(a);
      std::string right = precedence(b) <= p || b.kind == Term::Kind::kInterval
                              ? "(" + render(b) + ")"
                              : render(b);
      return left + t.op + right;
    }
    case Term::Kind::kInterval:
      return render(t.args[0]) + ".." + render(t.args[1]);
    case Term::Kind::kFunction:
      return t.name + "(" + join_terms(t.args) + ")";
  }
  return {};
}

std::string render(const Atom& a) {
  if (a.pool.size() == 1 && a.pool.front().empty()) return a.predicate;
  std::string out = a.predicate + "(";
  for (std::size_t i = 0; i < a.pool.size(); ++i) {
    if (i) out += "; ";
    out += join_terms(a.pool[i]);
  }
  return out + ")";
}

std::string render(const Literal& l) {
  if (l.kind == Literal::Kind::kAtom) {
    return (l.negated ? "not " : "") + render(l.atom);
  }
  return render(l.comparison.lhs) + cmp_text(l.comparison.op) + render(l.comparison.rhs);
}

std::string render(const Rule& r) {
  std::string out;
  for (std::size_t i = 0; i < r.head.size(); ++i) {
    if (i) out += " | ";
    out += render(r.head[i]);
  }
  if (!r.body.empty()) {
    out += r.head.empty() ? ":- " : " :- ";
    for (std::size_t i = 0; i < r.body.size(); ++i) {
      if (i) out += r.body[i - 1].conditional() ? "; " : ", ";
      const BodyElement& el = r.body[i];
      out += render(el.literal);
      if (el.conditional()) {
        out += ": ";
        for (std::size_t j = 0; j < el.condition.size(); ++j) {
          if (j) out += ", ";
          out += render(el.condition[j]);
        }
      }
    }
  }
  return out + ".";
}

std::string render(const Program& p) {
  std::string out;
  for (const auto& r : p.rules) out += render(r) + "\n";
  for (const auto& d : p.directives) out += d + "\n";
  return out;
}

}  // namespace clmasp::asp
