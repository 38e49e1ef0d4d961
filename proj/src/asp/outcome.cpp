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

#include "clmasp/asp/outcome.hpp"

#include <stdexcept>

#include "clmasp/asp/parser.hpp"

namespace clmasp::asp {

std::string_view outcome_name(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::kEmpty: return "Empty";
    case OutcomeKind::kNoAnswerAtom: return "NoAnswerAtom";
    case OutcomeKind::kMultipleAnswerAtoms: return "MultipleAnswerAtoms";
    case OutcomeKind::kSingleWrong: return "SingleWrong";
    case OutcomeKind::kSingleCorrect: return "SingleCorrect";
    case OutcomeKind::kMultipleAnswerSets: return "MultipleAnswerSets";
  }
  return "?";
}

OutcomeKind outcome_from_name(std::string_view name) {
  for (auto k : {OutcomeKind::kEmpty, OutcomeKind::kNoAnswerAtom,
                 OutcomeKind::kMultipleAnswerAtoms, OutcomeKind::kSingleWrong,
                 OutcomeKind::kSingleCorrect, OutcomeKind::kMultipleAnswerSets}) {
    if (outcome_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown outcome: " + std::string(name));
}

Outcome classify_outcome(const SolveAttempt& attempt, std::string_view gold) {
  if (const auto* failure = std::get_if<SolveFailure>(&attempt)) {
    return {OutcomeKind::kEmpty, failure->message};
  }
  const SolveResult& result = std::get<SolveResult>(attempt);
  if (result.answer_sets.empty()) {
    return {OutcomeKind::kEmpty, "no answer set"};
  }
  if (result.answer_sets.size() > 1) {
    return {OutcomeKind::kMultipleAnswerSets,
            std::to_string(result.answer_sets.size()) + " answer sets" +
                (result.stats.truncated ? " (enumeration truncated)" : "")};
  }
  auto answers = result.answer_sets.front().with_predicate("answer", 1);
  if (answers.empty()) return {OutcomeKind::kNoAnswerAtom, {}};
  if (answers.size() > 1) {
    std::string note;
    for (const auto* a : answers) note += (note.empty() ? "" : " ") + a->to_string();
    return {OutcomeKind::kMultipleAnswerAtoms, note};
  }
  const Symbol& arg = answers.front()->args.front();
  bool match = arg.kind != Symbol::Kind::kInteger && arg.text == gold;
  return {match ? OutcomeKind::kSingleCorrect : OutcomeKind::kSingleWrong,
          answers.front()->to_string()};
}

SolveAttempt try_solve(std::string_view program_text, const Limits& limits) {
  try {
    return solve(parse(program_text), limits);
  } catch (const ParseError& e) {
    return SolveFailure{std::string("parse error: ") + e.what()};
  } catch (const SolveError& e) {
    return SolveFailure{e.what()};
  }
}

Outcome evaluate_program(std::string_view program_text, std::string_view gold,
                         const Limits& limits) {
  return classify_outcome(try_solve(program_text, limits), gold);
}

}  // namespace clmasp::asp
