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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clmasp::asp {

enum class TokenKind {
  kIdentifier,   // lowercase-initial name; `not` is an identifier too
  kVariable,     // uppercase-initial name
  kAnonymous,    // _
  kString,       // "..." (value holds the unescaped text)
  kInteger,
  kLParen,
  kRParen,
  kComma,
  kSemicolon,
  kColon,
  kIf,           // :-
  kDot,
  kInterval,     // ..
  kBar,          // |
  kEq,           // = or ==
  kNeq,          // !=
  kLt,
  kLe,
  kGt,
  kGe,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kBackslash,
  kDirective,    // #name
  kEnd,
};

const char* token_kind_name(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;           // identifier / variable / unescaped string / directive name
  std::int64_t number = 0;    // kInteger only
  std::size_t offset = 0;     // byte offset into the source
  std::size_t length = 0;

  bool operator==(const Token&) const = default;
};

class LexError : public std::runtime_error {
 public:
  LexError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Splits program text into tokens. `%` line comments and `%* ... *%` block
// comments are skipped. The returned stream always ends with a kEnd token.
std::vector<Token> tokenize(std::string_view text);

}  // namespace clmasp::asp
