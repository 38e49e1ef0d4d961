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

#include <string>

#include "clmasp/assets.hpp"
#include "clmasp/generator.hpp"
#include "clmasp/random.hpp"

namespace clmasp::generator {

namespace {

constexpr std::uint64_t kOneHopFnv = 0xfa98c9c064507f77ULL;
constexpr std::size_t kOneHopLen = 3934;
constexpr std::uint64_t kTwoPlusFourFnv = 0xa071fc6d3c68a98aULL;
constexpr std::size_t kTwoPlusFourLen = 4003;

// The instruction preamble is taken from the first exemplar of the asset, so
// test entries are phrased exactly like the exemplars.
std::string_view instruction_preamble() {
  std::string_view asset = assets::two_plus_four_prompt();
  constexpr std::string_view kStart = "Example 1:\n### Instruction:\n";
  constexpr std::string_view kEnd = "solving the problem.";
  std::size_t a = asset.find(kStart);
  std::size_t b = asset.find(kEnd, a);
  if (a == std::string_view::npos || b == std::string_view::npos) {
    throw ConfigError("prompt asset lacks an instruction preamble");
  }
  a += kStart.size();
  return asset.substr(a, b + kEnd.size() - a);
}

}  // namespace

std::string_view variant_name(IclVariant v) {
  return v == IclVariant::kOneHop ? "one_hop" : "two_plus_four";
}

IclVariant variant_from_name(std::string_view name) {
  if (name == "one_hop") return IclVariant::kOneHop;
  if (name == "two_plus_four") return IclVariant::kTwoPlusFour;
  throw ConfigError("unknown ICL variant: " + std::string(name));
}

std::string_view prompt_asset(IclVariant v) {
  return v == IclVariant::kOneHop ? assets::one_hop_prompt() : assets::two_plus_four_prompt();
}

std::string instruction_block(const stepgame::Entry& entry) {
  std::string out(instruction_preamble());
  std::size_t n = 1;
  for (const auto& sentence : entry.story) {
    out += n == 1 ? " " : "\n";
    out += std::to_string(n++) + " " + sentence;
  }
  out += n == 1 ? " " : "\n";
  out += std::to_string(n) + " What is the relation of the agent " + entry.query.first +
         " to the agent " + entry.query.second + "? \n\n### Response:\n";
  return out;
}

PromptSpec build_prompt(const stepgame::Entry& entry, IclVariant v) {
  PromptSpec p;
  p.variant = v;
  p.entry = entry;
  p.rendered = std::string(prompt_asset(v)) + instruction_block(entry);
  p.id = entry.id + ":" + std::string(variant_name(v));
  return p;
}

AssetPin expected_pin(IclVariant v) {
  if (v == IclVariant::kOneHop) return {kOneHopFnv, kOneHopLen};
  return {kTwoPlusFourFnv, kTwoPlusFourLen};
}

AssetPin actual_pin(IclVariant v) {
  std::string_view a = prompt_asset(v);
  return {hash_string(a), a.size()};
}

}  // namespace clmasp::generator
