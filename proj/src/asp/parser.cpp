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

#include "clmasp/asp/parser.hpp"

#include <algorithm>
#include <optional>

#include "clmasp/asp/lexer.hpp"

namespace clmasp::asp {
namespace {

bool is_comparison(TokenKind k) {
  switch (k) {
    case TokenKind::kEq:
    case TokenKind::kNeq:
    case TokenKind::kLt:
    case TokenKind::kLe:
    case TokenKind::kGt:
    case TokenKind::kGe:
      return true;
    default:
      return false;
  }
}

bool is_arithmetic(TokenKind k) {
  switch (k) {
    case TokenKind::kPlus:
    case TokenKind::kMinus:
    case TokenKind::kStar:
    case TokenKind::kSlash:
    case TokenKind::kBackslash:
    case TokenKind::kInterval:
      return true;
    default:
      return false;
  }
}

CmpOp to_cmp(TokenKind k) {
  switch (k) {
    case TokenKind::kEq: return CmpOp::kEq;
    case TokenKind::kNeq: return CmpOp::kNeq;
    case TokenKind::kLt: return CmpOp::kLt;
    case TokenKind::kLe: return CmpOp::kLe;
    case TokenKind::kGt: return CmpOp::kGt;
    default: return CmpOp::kGe;
  }
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Program program() {
    Program prog;
    while (cur().kind != TokenKind::kEnd) {
      if (cur().kind == TokenKind::kDirective) {
        prog.directives.push_back(directive());
      } else {
        prog.rules.push_back(statement());
      }
    }
    if (prog.rules.empty() && prog.directives.empty()) {
      fail({"statement"});
    }
    return prog;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& ahead(std::size_t n = 1) const {
    return toks_[std::min(pos_ + n, toks_.size() - 1)];
  }
  bool at(TokenKind k) const { return cur().kind == k; }
  bool accept(TokenKind k) {
    if (!at(k)) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = cur();
    std::string got = t.kind == TokenKind::kEnd ? "end of input"
                                                 : std::string(token_kind_name(t.kind));
    if (!t.text.empty() && t.kind != TokenKind::kString) got += " '" + t.text + "'";
    std::string msg = "unexpected " + got + " at offset " + std::to_string(t.offset);
    if (!expected.empty()) {
      msg += "; expected ";
      for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i) msg += i + 1 == expected.size() ? " or " : ", ";
        msg += expected[i];
      }
    }
    throw ParseError(msg, t.offset, std::move(expected));
  }

  void expect(TokenKind k) {
    if (!accept(k)) fail({token_kind_name(k)});
  }

  std::string directive() {
    const Token& d = cur();
    if (d.text != "show") {
      throw ParseError("unsupported directive #" + d.text, d.offset, {"#show"});
    }
    ++pos_;
    std::string text = "#show";
    // `#show.` or `#show name/arity.`
    if (at(TokenKind::kIdentifier)) {
      text += " " + cur().text;
      ++pos_;
      expect(TokenKind::kSlash);
      if (!at(TokenKind::kInteger)) fail({"integer"});
      text += "/" + std::to_string(cur().number);
      ++pos_;
    }
    expect(TokenKind::kDot);
    return text + ".";
  }

  Rule statement() {
    Rule rule;
    rule.span.begin = cur().offset;
    if (!accept(TokenKind::kIf)) {
      rule.head.push_back(atom());
      while (at(TokenKind::kComma) || at(TokenKind::kSemicolon) || at(TokenKind::kBar)) {
        ++pos_;
        rule.head.push_back(atom());
      }
      if (accept(TokenKind::kIf)) rule.body = body();
    } else {
      rule.body = body();
    }
    if (!at(TokenKind::kDot)) {
      if (rule.body.empty()) {
        fail({"','", "':-'", "'.'"});
      }
      fail({"','", "';'", "'.'"});
    }
    rule.span.end = cur().offset + 1;
    ++pos_;
    return rule;
  }

  std::vector<BodyElement> body() {
    std::vector<BodyElement> out;
    for (;;) {
      BodyElement el;
      el.literal = literal();
      if (accept(TokenKind::kColon)) {
        el.condition.push_back(literal());
        while (accept(TokenKind::kComma)) el.condition.push_back(literal());
      }
      out.push_back(std::move(el));
      if (!accept(TokenKind::kComma) && !accept(TokenKind::kSemicolon)) break;
    }
    return out;
  }

  Literal literal() {
    Literal lit;
    if (at(TokenKind::kIdentifier) && cur().text == "not" &&
        ahead().kind == TokenKind::kIdentifier) {
      ++pos_;
      lit.negated = true;
      lit.atom = atom();
      return lit;
    }
    if (at(TokenKind::kIdentifier)) {
      std::size_t save = pos_;
      Atom a = atom();
      if (!is_comparison(cur().kind) && !is_arithmetic(cur().kind)) {
        lit.atom = std::move(a);
        return lit;
      }
      pos_ = save;  // the identifier starts a term of a comparison
    }
    Term lhs = term();
    if (!is_comparison(cur().kind)) {
      fail({"comparison operator"});
    }
    lit.kind = Literal::Kind::kComparison;
    lit.comparison.op = to_cmp(cur().kind);
    ++pos_;
    lit.comparison.lhs = std::move(lhs);
    lit.comparison.rhs = term();
    return lit;
  }

  Atom atom() {
    if (!at(TokenKind::kIdentifier)) fail({"identifier"});
    Atom a;
    a.predicate = cur().text;
    ++pos_;
    if (accept(TokenKind::kLParen)) {
      a.pool.clear();
      if (at(TokenKind::kRParen)) {
        a.pool.emplace_back();
      } else {
        a.pool.push_back(term_list());
        while (accept(TokenKind::kSemicolon)) a.pool.push_back(term_list());
        for (const auto& tuple : a.pool) {
          if (tuple.size() != a.pool.front().size()) {
            throw ParseError("pool alternatives of '" + a.predicate +
                                 "' differ in arity",
                             cur().offset);
          }
        }
      }
      expect(TokenKind::kRParen);
    }
    return a;
  }

  std::vector<Term> term_list() {
    std::vector<Term> out;
    out.push_back(term());
    while (accept(TokenKind::kComma)) out.push_back(term());
    return out;
  }

  Term term() {
    Term lo = additive();
    if (accept(TokenKind::kInterval)) return Term::interval(std::move(lo), additive());
    return lo;
  }

  Term additive() {
    Term left = multiplicative();
    while (at(TokenKind::kPlus) || at(TokenKind::kMinus)) {
      char op = at(TokenKind::kPlus) ? '+' : '-';
      ++pos_;
      left = Term::binary(op, std::move(left), multiplicative());
    }
    return left;
  }

  Term multiplicative() {
    Term left = unary();
    for (;;) {
      char op = 0;
      if (at(TokenKind::kStar)) op = '*';
      else if (at(TokenKind::kSlash)) op = '/';
      else if (at(TokenKind::kBackslash)) op = '\\';
      else break;
      ++pos_;
      left = Term::binary(op, std::move(left), unary());
    }
    return left;
  }

  Term unary() {
    if (accept(TokenKind::kMinus)) {
      Term t = unary();
      if (t.kind == Term::Kind::kInteger) {
        t.number = -t.number;
        return t;
      }
      return Term::unary('-', std::move(t));
    }
    return primary();
  }

  Term primary() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::kInteger:
        ++pos_;
        return Term::integer(t.number);
      case TokenKind::kString:
        ++pos_;
        return Term::string(t.text);
      case TokenKind::kVariable:
        ++pos_;
        return Term::variable(t.text);
      case TokenKind::kAnonymous:
        ++pos_;
        return Term::anonymous();
      case TokenKind::kIdentifier: {
        Term out = Term::symbol(t.text);
        ++pos_;
        if (accept(TokenKind::kLParen)) {
          out.kind = Term::Kind::kFunction;
          if (!at(TokenKind::kRParen)) out.args = term_list();
          expect(TokenKind::kRParen);
        }
        return out;
      }
      case TokenKind::kLParen: {
        ++pos_;
        Term inner = term();
        expect(TokenKind::kRParen);
        return inner;
      }
      default:
        fail({"term"});
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Program parse(std::string_view text) {
  std::vector<Token> tokens;
  try {
    tokens = tokenize(text);
  } catch (const LexError& e) {
    throw ParseError(e.what(), e.offset());
  }
  return Parser(std::move(tokens)).program();
}

int check_syntax(std::string_view text) {
  try {
    parse(text);
    return 1;
  } catch (const ParseError&) {
    return 0;
  }
}

namespace {

// Byte offset of the first stop token outside a string literal, or npos.
std::size_t find_stop(std::string_view text, const std::vector<std::string>& stops) {
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"' || c == '\n') in_string = false;
      continue;
    }
    for (const auto& s : stops) {
      if (!s.empty() && text.compare(i, s.size(), s) == 0) return i;
    }
    if (c == '"') in_string = true;
  }
  return std::string_view::npos;
}

// Offset of the last '.' that terminates a statement, or npos.
std::size_t last_terminator(std::string_view text) {
  std::size_t last = std::string_view::npos;
  enum class State { kCode, kString, kLineComment, kBlockComment } state = State::kCode;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    switch (state) {
      case State::kString:
        if (c == '\\') ++i;
        else if (c == '"' || c == '\n') state = State::kCode;
        break;
      case State::kLineComment:
        if (c == '\n') state = State::kCode;
        break;
      case State::kBlockComment:
        if (c == '*' && i + 1 < text.size() && text[i + 1] == '%') {
          ++i;
          state = State::kCode;
        }
        break;
      case State::kCode:
        if (c == '"') {
          state = State::kString;
        } else if (c == '%') {
          state = (i + 1 < text.size() && text[i + 1] == '*') ? State::kBlockComment
                                                              : State::kLineComment;
        } else if (c == '.') {
          if (i + 1 < text.size() && text[i + 1] == '.') {
            ++i;  // interval
          } else {
            last = i;
          }
        }
        break;
    }
  }
  return last;
}

bool comment_or_blank(std::string_view line) {
  std::size_t first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '%';
}

}  // namespace

std::string post_process(std::string_view raw, const std::vector<std::string>& stop_tokens) {
  std::string_view text = raw;
  if (std::size_t stop = find_stop(text, stop_tokens); stop != std::string_view::npos) {
    text = text.substr(0, stop);
  }

  std::size_t term = last_terminator(text);
  std::string out;
  std::string_view tail = text;
  if (term != std::string_view::npos) {
    out.assign(text.substr(0, term + 1));
    tail = text.substr(term + 1);
  }
  // Keep only comment or blank lines after the last complete statement.
  for (std::size_t pos = 0; pos < tail.size();) {
    std::size_t nl = tail.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? tail.size() : nl + 1;
    std::string_view line = tail.substr(pos, end - pos);
    if (comment_or_blank(line.substr(0, line.size() - (nl == std::string_view::npos ? 0 : 1)))) {
      out.append(line);
    }
    pos = end;
  }

  if (out != raw && check_syntax(raw) == 1 && check_syntax(out) == 0) {
    return std::string(raw);
  }
  return out;
}

}  // namespace clmasp::asp
