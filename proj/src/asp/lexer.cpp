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

#include "clmasp/asp/lexer.hpp"

#include <cctype>
#include <limits>

namespace clmasp::asp {

const char* token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::kIdentifier: return "identifier";
    case TokenKind::kVariable: return "variable";
    case TokenKind::kAnonymous: return "'_'";
    case TokenKind::kString: return "string";
    case TokenKind::kInteger: return "integer";
    case TokenKind::kLParen: return "'('";
    case TokenKind::kRParen: return "')'";
    case TokenKind::kComma: return "','";
    case TokenKind::kSemicolon: return "';'";
    case TokenKind::kColon: return "':'";
    case TokenKind::kIf: return "':-'";
    case TokenKind::kDot: return "'.'";
    case TokenKind::kInterval: return "'..'";
    case TokenKind::kBar: return "'|'";
    case TokenKind::kEq: return "'='";
    case TokenKind::kNeq: return "'!='";
    case TokenKind::kLt: return "'<'";
    case TokenKind::kLe: return "'<='";
    case TokenKind::kGt: return "'>'";
    case TokenKind::kGe: return "'>='";
    case TokenKind::kPlus: return "'+'";
    case TokenKind::kMinus: return "'-'";
    case TokenKind::kStar: return "'*'";
    case TokenKind::kSlash: return "'/'";
    case TokenKind::kBackslash: return "'\\'";
    case TokenKind::kDirective: return "directive";
    case TokenKind::kEnd: return "end of input";
  }
  return "?";
}

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_trivia();
      if (pos_ >= text_.size()) {
        out.push_back(Token{TokenKind::kEnd, {}, 0, pos_, 0});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void skip_trivia() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '%' && peek(1) == '*') {
        std::size_t start = pos_;
        std::size_t close = text_.find("*%", pos_ + 2);
        if (close == std::string_view::npos) {
          throw LexError("unterminated block comment", start);
        }
        pos_ = close + 2;
      } else if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        return;
      }
    }
  }

  Token make(TokenKind kind, std::size_t start) const {
    return Token{kind, {}, 0, start, pos_ - start};
  }

  Token next() {
    const std::size_t start = pos_;
    const char c = text_[pos_];

    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::int64_t value = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        int digit = peek() - '0';
        if (value > (std::numeric_limits<std::int64_t>::max() - digit) / 10) {
          throw LexError("integer literal out of range", start);
        }
        value = value * 10 + digit;
        ++pos_;
      }
      Token tok = make(TokenKind::kInteger, start);
      tok.number = value;
      return tok;
    }

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (is_name_char(peek())) ++pos_;
      Token tok;
      std::string_view name = text_.substr(start, pos_ - start);
      if (name == "_") {
        tok = make(TokenKind::kAnonymous, start);
      } else {
        // Leading underscores do not change the identifier/variable split.
        std::size_t first = name.find_first_not_of('_');
        bool upper = first != std::string_view::npos &&
                     std::isupper(static_cast<unsigned char>(name[first]));
        tok = make(upper ? TokenKind::kVariable : TokenKind::kIdentifier, start);
      }
      tok.text = std::string(name);
      return tok;
    }

    if (c == '"') {
      ++pos_;
      std::string value;
      for (;;) {
        if (pos_ >= text_.size()) throw LexError("unterminated string", start);
        char s = text_[pos_++];
        if (s == '"') break;
        if (s == '\n') throw LexError("newline in string literal", start);
        if (s == '\\') {
          if (pos_ >= text_.size()) throw LexError("unterminated string", start);
          char e = text_[pos_++];
          switch (e) {
            case 'n': value.push_back('\n'); break;
            case 't': value.push_back('\t'); break;
            case '\\': value.push_back('\\'); break;
            case '"': value.push_back('"'); break;
            default:
              throw LexError(std::string("unknown escape \\") + e, pos_ - 2);
          }
        } else {
          value.push_back(s);
        }
      }
      Token tok = make(TokenKind::kString, start);
      tok.text = std::move(value);
      return tok;
    }

    if (c == '#') {
      ++pos_;
      while (is_name_char(peek())) ++pos_;
      if (pos_ == start + 1) throw LexError("illegal character '#'", start);
      Token tok = make(TokenKind::kDirective, start);
      tok.text = std::string(text_.substr(start + 1, pos_ - start - 1));
      return tok;
    }

    ++pos_;
    switch (c) {
      case '(': return make(TokenKind::kLParen, start);
      case ')': return make(TokenKind::kRParen, start);
      case ',': return make(TokenKind::kComma, start);
      case ';': return make(TokenKind::kSemicolon, start);
      case '|': return make(TokenKind::kBar, start);
      case '+': return make(TokenKind::kPlus, start);
      case '-': return make(TokenKind::kMinus, start);
      case '*': return make(TokenKind::kStar, start);
      case '/': return make(TokenKind::kSlash, start);
      case '\\': return make(TokenKind::kBackslash, start);
      case ':':
        if (peek() == '-') { ++pos_; return make(TokenKind::kIf, start); }
        return make(TokenKind::kColon, start);
      case '.':
        if (peek() == '.') { ++pos_; return make(TokenKind::kInterval, start); }
        return make(TokenKind::kDot, start);
      case '=':
        if (peek() == '=') ++pos_;
        return make(TokenKind::kEq, start);
      case '!':
        if (peek() == '=') { ++pos_; return make(TokenKind::kNeq, start); }
        break;
      case '<':
        if (peek() == '=') { ++pos_; return make(TokenKind::kLe, start); }
        if (peek() == '>') { ++pos_; return make(TokenKind::kNeq, start); }
        return make(TokenKind::kLt, start);
      case '>':
        if (peek() == '=') { ++pos_; return make(TokenKind::kGe, start); }
        return make(TokenKind::kGt, start);
      default:
        break;
    }
    std::string shown;
    auto byte = static_cast<unsigned char>(c);
    if (byte < 0x20 || byte >= 0x7f) {
      static constexpr char kHex[] = "0123456789abcdef";
      shown = std::string("byte 0x") + kHex[byte >> 4] + kHex[byte & 0xf];
    } else {
      shown = std::string("'") + c + "'";
    }
    throw LexError("illegal character " + shown, start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) { return Lexer(text).run(); }

}  // namespace clmasp::asp
