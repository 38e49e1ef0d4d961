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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clmasp/asp/ast.hpp"

namespace clmasp::asp {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset,
             std::vector<std::string> expected = {})
      : std::runtime_error(what), offset_(offset), expected_(std::move(expected)) {}

  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

// Parses the full input as a program. Lexical errors are reported as
// ParseError as well. An input with no statements is rejected.
Program parse(std::string_view text);

// Syntax admission: 1 iff `parse` succeeds, 0 otherwise.
int check_syntax(std::string_view text);

// Cleans raw model output: truncates at the first stop token found outside a
// string literal, then drops an incomplete trailing statement (text after the
// last statement-terminating '.'). Trailing comment lines are kept. If the
// input parsed and the cleaned text would not, the input is returned as-is.
std::string post_process(std::string_view raw,
                         const std::vector<std::string>& stop_tokens = {});

}  // namespace clmasp::asp
