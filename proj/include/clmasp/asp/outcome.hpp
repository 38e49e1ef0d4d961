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

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "clmasp/asp/grounder.hpp"
#include "clmasp/asp/solver.hpp"

namespace clmasp::asp {

enum class OutcomeKind {
  kEmpty,
  kNoAnswerAtom,
  kMultipleAnswerAtoms,
  kSingleWrong,
  kSingleCorrect,
  kMultipleAnswerSets,
};

std::string_view outcome_name(OutcomeKind kind);
OutcomeKind outcome_from_name(std::string_view name);  // throws std::invalid_argument

struct Outcome {
  OutcomeKind kind = OutcomeKind::kEmpty;
  std::string note;
};

struct SolveFailure {
  std::string message;
};

using SolveAttempt = std::variant<SolveResult, SolveFailure>;

// Maps a solve result onto the five-way error taxonomy plus SingleCorrect.
// `gold` is the expected argument of the single `answer/1` atom.
Outcome classify_outcome(const SolveAttempt& attempt, std::string_view gold);

// parse + solve + classify; parse and solver errors become SolveFailure.
SolveAttempt try_solve(std::string_view program_text, const Limits& limits = {});
Outcome evaluate_program(std::string_view program_text, std::string_view gold,
                         const Limits& limits = {});

}  // namespace clmasp::asp
