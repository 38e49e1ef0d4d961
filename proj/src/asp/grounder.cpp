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

#include "clmasp/asp/grounder.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>
#include <utility>

namespace clmasp::asp {

std::string Symbol::to_string() const {
  switch (kind) {
    case Kind::kInteger:
      return std::to_string(number);
    case Kind::kConstant:
      return text;
    case Kind::kString: {
      std::string out = "\"";
      for (char c : text) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      return out + "\"";
    }
  }
  return {};
}

std::strong_ordering Symbol::operator<=>(const Symbol& other) const {
  if (kind != other.kind) return kind <=> other.kind;
  if (kind == Kind::kInteger) return number <=> other.number;
  int c = text.compare(other.text);
  return c < 0 ? std::strong_ordering::less
               : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
}

std::string GroundAtom::to_string() const {
  if (args.empty()) return predicate;
  std::string out = predicate + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ",";
    out += args[i].to_string();
  }
  return out + ")";
}

std::string GroundProgram::render(const GroundRule& rule) const {
  std::string out;
  for (std::size_t i = 0; i < rule.head.size(); ++i) {
    if (i) out += " | ";
    out += atoms[rule.head[i]].to_string();
  }
  if (!rule.body.empty()) {
    out += rule.head.empty() ? ":- " : " :- ";
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
      if (i) out += ", ";
      out += atoms[rule.body[i]].to_string();
    }
  }
  return out + ".";
}

namespace {

struct Value {
  enum Kind : std::uint8_t { kInt = 0, kConst = 1, kStr = 2 };
  std::uint8_t kind = kInt;
  std::int64_t v = 0;
  bool operator==(const Value&) const = default;
};

std::uint64_t mix(std::uint64_t h, std::uint64_t x) {
  x *= 0x9e3779b97f4a7c15ULL;
  x ^= x >> 32;
  return (h ^ x) * 0x100000001b3ULL + 0x7f4a7c15ULL;
}

std::uint64_t hash_value(std::uint64_t h, Value v) {
  return mix(mix(h, v.kind), static_cast<std::uint64_t>(v.v));
}

struct CTerm {
  enum class Kind { kConst, kVar, kAnon, kUnary, kBinary, kInterval };
  Kind kind = Kind::kConst;
  Value value;
  int slot = -1;
  char op = 0;
  std::vector<CTerm> args;
};

void collect_slots(const CTerm& t, std::vector<int>& out) {
  if (t.kind == CTerm::Kind::kVar) out.push_back(t.slot);
  for (const auto& a : t.args) collect_slots(a, out);
}

bool has_interval(const CTerm& t) {
  if (t.kind == CTerm::Kind::kInterval) return true;
  return std::any_of(t.args.begin(), t.args.end(), has_interval);
}

struct CAtom {
  std::uint32_t pred = 0;
  std::vector<CTerm> args;
};

struct CCompare {
  CmpOp op = CmpOp::kEq;
  CTerm lhs;
  CTerm rhs;
};

struct CCond {
  CCompare head;
  std::vector<CCompare> condition;
};

struct CRule {
  std::vector<CAtom> head;
  std::vector<CAtom> pos;
  std::vector<CCompare> cmps;
  std::vector<CCond> conds;
  int num_slots = 0;
  std::string text;
};

enum class Range { kAll, kDelta, kOld };

struct ArgAction {
  enum Kind { kKey, kBind, kCheck, kSkip };
  Kind kind = kSkip;
  int slot = -1;
};

struct Step {
  enum class Kind { kMatch, kFilter, kAssign, kImply, kGroup };
  Kind kind = Kind::kMatch;
  std::size_t index = 0;           // into pos / cmps / conds
  Range range = Range::kAll;       // kMatch
  std::uint32_t mask = 0;          // kMatch
  std::vector<ArgAction> actions;  // kMatch
  int slot = -1;                   // kAssign / kGroup: variable being bound
  bool var_on_lhs = true;          // kAssign / kGroup
  std::vector<std::size_t> members;  // kGroup
};

Step make_step(Step::Kind kind, std::size_t index) {
  Step s;
  s.kind = kind;
  s.index = index;
  return s;
}

struct Plan {
  std::vector<Step> steps;
};

struct Index {
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
};

struct Pred {
  std::string name;
  std::size_t arity = 0;
  std::vector<std::uint32_t> atoms;
  std::unordered_map<std::uint32_t, Index> indexes;
};

class Grounder {
 public:
  Grounder(const Program& program, const Limits& limits) : limits_(limits) {
    for (const Rule& r : program.rules) compile(r);
  }

  GroundProgram run() {
    // Facts and builtin-only bodies.
    for (const CRule& r : rules_) {
      if (!r.pos.empty()) continue;
      Plan plan = make_plan(r, -1);
      evaluate(r, plan, 0, 0);
    }
    std::vector<std::vector<std::optional<Plan>>> plans(rules_.size());
    for (std::size_t ri = 0; ri < rules_.size(); ++ri) plans[ri].resize(rules_[ri].pos.size());
    std::size_t delta_begin = 0;
    std::size_t delta_end = atom_pred_.size();
    std::size_t rounds = 1;
    while (delta_begin < delta_end) {
      if (rounds > limits_.max_iterations) {
        throw SolveError(SolveError::Kind::kResource,
                         "fixpoint iteration limit exceeded (" +
                             std::to_string(limits_.max_iterations) + ")");
      }
      for (std::size_t ri = 0; ri < rules_.size(); ++ri) {
        const CRule& r = rules_[ri];
        for (std::size_t d = 0; d < r.pos.size(); ++d) {
          if (!has_atoms_in(preds_[r.pos[d].pred], delta_begin, delta_end)) continue;
          // Join order is fixed the first time a (rule, delta) pair fires.
          auto& plan = plans[ri][d];
          if (!plan) plan = make_plan(r, static_cast<int>(d));
          evaluate(r, *plan, delta_begin, delta_end);
        }
      }
      delta_begin = delta_end;
      delta_end = atom_pred_.size();
      ++rounds;
    }
    return export_program(rounds);
  }

 private:
  // ---- interning -------------------------------------------------------
  std::int64_t intern(const std::string& s) {
    auto [it, fresh] = name_ids_.try_emplace(s, static_cast<std::int64_t>(names_.size()));
    if (fresh) names_.push_back(s);
    return it->second;
  }

  std::uint32_t pred_id(const std::string& name, std::size_t arity) {
    if (arity > 32) {
      throw SolveError(SolveError::Kind::kUnsupported,
                       "predicate " + name + " has more than 32 arguments");
    }
    auto key = std::make_pair(name, arity);
    auto it = pred_ids_.find(key);
    if (it != pred_ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(preds_.size());
    preds_.push_back(Pred{name, arity, {}, {}});
    pred_ids_.emplace(key, id);
    return id;
  }

  int compare(Value a, Value b) const {
    if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
    if (a.kind == Value::kInt) return (a.v > b.v) - (a.v < b.v);
    if (a.v == b.v) return 0;
    return names_[a.v] < names_[b.v] ? -1 : 1;
  }

  // ---- compilation -----------------------------------------------------
  struct SlotMap {
    std::map<std::string, int> slots;
    int next = 0;
    int get(const std::string& name) {
      auto [it, fresh] = slots.try_emplace(name, next);
      if (fresh) ++next;
      return it->second;
    }
  };

  [[noreturn]] static void unsupported(const std::string& what, const std::string& rule) {
    throw SolveError(SolveError::Kind::kUnsupported, what + " in rule: " + rule);
  }

  CTerm compile_term(const Term& t, SlotMap& slots, const std::string& rule) {
    CTerm c;
    switch (t.kind) {
      case Term::Kind::kSymbol:
        c.value = Value{Value::kConst, intern(t.name)};
        break;
      case Term::Kind::kString:
        c.value = Value{Value::kStr, intern(t.name)};
        break;
      case Term::Kind::kInteger:
        c.value = Value{Value::kInt, t.number};
        break;
      case Term::Kind::kVariable:
        c.kind = CTerm::Kind::kVar;
        c.slot = slots.get(t.name);
        break;
      case Term::Kind::kAnonymous:
        c.kind = CTerm::Kind::kAnon;
        c.slot = slots.next++;
        break;
      case Term::Kind::kUnary:
        c.kind = CTerm::Kind::kUnary;
        c.op = t.op;
        c.args.push_back(compile_term(t.args[0], slots, rule));
        break;
      case Term::Kind::kBinary:
        c.kind = CTerm::Kind::kBinary;
        c.op = t.op;
        c.args.push_back(compile_term(t.args[0], slots, rule));
        c.args.push_back(compile_term(t.args[1], slots, rule));
        break;
      case Term::Kind::kInterval:
        c.kind = CTerm::Kind::kInterval;
        c.args.push_back(compile_term(t.args[0], slots, rule));
        c.args.push_back(compile_term(t.args[1], slots, rule));
        break;
      case Term::Kind::kFunction:
        unsupported("function term " + t.name, rule);
    }
    return c;
  }

  CCompare compile_cmp(const Comparison& cmp, SlotMap& slots, const std::string& rule) {
    CCompare c{cmp.op, compile_term(cmp.lhs, slots, rule), compile_term(cmp.rhs, slots, rule)};
    if (c.lhs.kind == CTerm::Kind::kAnon || c.rhs.kind == CTerm::Kind::kAnon) {
      unsupported("anonymous variable in comparison", rule);
    }
    return c;
  }

  static std::vector<std::vector<std::size_t>> pool_choices(const std::vector<std::size_t>& sizes) {
    std::vector<std::vector<std::size_t>> out{{}};
    for (std::size_t n : sizes) {
      std::vector<std::vector<std::size_t>> next;
      for (const auto& prefix : out) {
        for (std::size_t i = 0; i < n; ++i) {
          auto v = prefix;
          v.push_back(i);
          next.push_back(std::move(v));
        }
      }
      out = std::move(next);
    }
    return out;
  }

  void compile(const Rule& rule) {
    const std::string text = asp::render(rule);
    for (const auto& el : rule.body) {
      if (el.literal.negated) unsupported("negation ('not')", text);
      if (el.conditional()) {
        if (el.literal.kind != Literal::Kind::kComparison) {
          unsupported("conditional literal with an atom", text);
        }
        for (const auto& c : el.condition) {
          if (c.kind != Literal::Kind::kComparison) {
            unsupported("condition with an atom", text);
          }
        }
      }
    }

    // Body pools expand into separate rules.
    std::vector<std::size_t> body_pool_sizes;
    for (const auto& el : rule.body) {
      if (!el.conditional() && el.literal.kind == Literal::Kind::kAtom) {
        body_pool_sizes.push_back(el.literal.atom.pool.size());
      }
    }
    // A single pooled head atom is a conjunction of its instances; pools in a
    // disjunctive head add disjuncts.
    std::vector<std::vector<std::pair<const Atom*, std::size_t>>> head_variants;
    if (rule.head.size() == 1) {
      for (std::size_t i = 0; i < rule.head[0].pool.size(); ++i) {
        head_variants.push_back({{&rule.head[0], i}});
      }
    } else {
      std::vector<std::pair<const Atom*, std::size_t>> all;
      for (const Atom& a : rule.head) {
        for (std::size_t i = 0; i < a.pool.size(); ++i) all.emplace_back(&a, i);
      }
      head_variants.push_back(std::move(all));
    }

    for (const auto& choice : pool_choices(body_pool_sizes)) {
      for (const auto& head : head_variants) {
        SlotMap slots;
        CRule c;
        c.text = text;
        std::size_t k = 0;
        for (const auto& el : rule.body) {
          if (el.conditional()) {
            CCond cond;
            cond.head = compile_cmp(el.literal.comparison, slots, text);
            for (const auto& l : el.condition) {
              cond.condition.push_back(compile_cmp(l.comparison, slots, text));
            }
            c.conds.push_back(std::move(cond));
          } else if (el.literal.kind == Literal::Kind::kComparison) {
            c.cmps.push_back(compile_cmp(el.literal.comparison, slots, text));
          } else {
            const Atom& a = el.literal.atom;
            CAtom ca;
            ca.pred = pred_id(a.predicate, a.arity());
            for (const Term& t : a.pool[choice[k]]) {
              ca.args.push_back(compile_term(t, slots, text));
              if (has_interval(ca.args.back())) unsupported("interval in rule body", text);
            }
            ++k;
            c.pos.push_back(std::move(ca));
          }
        }
        for (const auto& [atom, alt] : head) {
          CAtom ca;
          ca.pred = pred_id(atom->predicate, atom->arity());
          for (const Term& t : atom->pool[alt]) {
            ca.args.push_back(compile_term(t, slots, text));
            if (ca.args.back().kind == CTerm::Kind::kAnon) {
              throw SolveError(SolveError::Kind::kUnsafe,
                               "anonymous variable in head of rule: " + text);
            }
          }
          c.head.push_back(std::move(ca));
        }
        c.num_slots = slots.next;
        rules_.push_back(std::move(c));
        // Safety is a static property; reject now rather than mid-grounding.
        for (int d = -1; d < static_cast<int>(rules_.back().pos.size()); ++d) {
          make_plan(rules_.back(), d);
        }
      }
    }
  }

  // ---- planning --------------------------------------------------------
  static bool all_bound(const CTerm& t, const std::vector<bool>& bound) {
    std::vector<int> s;
    collect_slots(t, s);
    return std::all_of(s.begin(), s.end(), [&](int i) { return bound[i]; });
  }

  static int count_unbound(const CTerm& t, const std::vector<bool>& bound, int& which) {
    std::vector<int> s;
    collect_slots(t, s);
    int n = 0;
    for (int i : s) {
      if (!bound[i]) {
        ++n;
        which = i;
      }
    }
    return n;
  }

  // True if `slot` occurs once in `t` along a path of + - * and unary minus.
  static bool invertible(const CTerm& t, int slot) {
    if (t.kind == CTerm::Kind::kVar) return t.slot == slot;
    if (t.kind == CTerm::Kind::kUnary) return invertible(t.args[0], slot);
    if (t.kind == CTerm::Kind::kBinary && (t.op == '+' || t.op == '-' || t.op == '*')) {
      std::vector<int> l, r;
      collect_slots(t.args[0], l);
      collect_slots(t.args[1], r);
      bool in_l = std::count(l.begin(), l.end(), slot) > 0;
      bool in_r = std::count(r.begin(), r.end(), slot) > 0;
      if (in_l == in_r) return false;
      return in_l ? invertible(t.args[0], slot) : invertible(t.args[1], slot);
    }
    return false;
  }

  // For `a = b` with exactly one unbound variable that can be solved for.
  static bool assignable(const CCompare& c, const std::vector<bool>& bound, int& slot,
                         bool& on_lhs) {
    if (c.op != CmpOp::kEq) return false;
    int wl = -1, wr = -1;
    int nl = count_unbound(c.lhs, bound, wl);
    int nr = count_unbound(c.rhs, bound, wr);
    if (nl + nr != 1) return false;
    on_lhs = nl == 1;
    slot = on_lhs ? wl : wr;
    const CTerm& side = on_lhs ? c.lhs : c.rhs;
    const CTerm& other = on_lhs ? c.rhs : c.lhs;
    if (side.kind == CTerm::Kind::kVar) return true;
    if (has_interval(other)) return false;
    return invertible(side, slot);
  }

  Plan make_plan(const CRule& r, int delta) {
    Plan plan;
    std::vector<bool> bound(r.num_slots, false);
    std::vector<bool> pos_done(r.pos.size(), false);
    std::vector<bool> cmp_done(r.cmps.size(), false);
    std::vector<bool> cond_done(r.conds.size(), false);

    auto add_match = [&](std::size_t i) {
      Step s;
      s.kind = Step::Kind::kMatch;
      s.index = i;
      if (delta < 0) s.range = Range::kAll;
      else if (static_cast<int>(i) == delta) s.range = Range::kDelta;
      else s.range = static_cast<int>(i) < delta ? Range::kOld : Range::kAll;
      std::vector<bool> local = bound;
      for (std::size_t a = 0; a < r.pos[i].args.size(); ++a) {
        const CTerm& t = r.pos[i].args[a];
        ArgAction act;
        if (t.kind == CTerm::Kind::kAnon) {
          act.kind = ArgAction::kSkip;
        } else if (t.kind == CTerm::Kind::kVar && !bound[t.slot]) {
          act.kind = local[t.slot] ? ArgAction::kCheck : ArgAction::kBind;
          act.slot = t.slot;
          local[t.slot] = true;
        } else {
          act.kind = ArgAction::kKey;
          s.mask |= 1u << a;
        }
        s.actions.push_back(act);
      }
      bound = std::move(local);
      pos_done[i] = true;
      plan.steps.push_back(std::move(s));
    };

    auto atom_ready = [&](std::size_t i, int& keys) {
      keys = 0;
      for (const CTerm& t : r.pos[i].args) {
        if (t.kind == CTerm::Kind::kAnon) continue;
        if (t.kind == CTerm::Kind::kVar) {
          if (bound[t.slot]) ++keys;
          continue;
        }
        if (!all_bound(t, bound)) return false;
        ++keys;
      }
      return true;
    };

    if (delta >= 0) add_match(static_cast<std::size_t>(delta));

    for (;;) {
      bool progress = false;
      // Fully bound atoms and comparisons are pure filters.
      for (std::size_t i = 0; i < r.cmps.size(); ++i) {
        if (cmp_done[i]) continue;
        if (all_bound(r.cmps[i].lhs, bound) && all_bound(r.cmps[i].rhs, bound)) {
          plan.steps.push_back(make_step(Step::Kind::kFilter, i));
          cmp_done[i] = progress = true;
        }
      }
      for (std::size_t i = 0; i < r.pos.size(); ++i) {
        int keys = 0;
        if (!pos_done[i] && atom_ready(i, keys) &&
            keys == static_cast<int>(r.pos[i].args.size())) {
          add_match(i);
          progress = true;
        }
      }
      if (progress) continue;

      for (std::size_t i = 0; i < r.cmps.size() && !progress; ++i) {
        int slot = -1;
        bool on_lhs = true;
        if (!cmp_done[i] && assignable(r.cmps[i], bound, slot, on_lhs)) {
          Step s = make_step(Step::Kind::kAssign, i);
          s.slot = slot;
          s.var_on_lhs = on_lhs;
          plan.steps.push_back(std::move(s));
          bound[slot] = true;
          cmp_done[i] = progress = true;
        }
      }
      if (progress) continue;

      int best = -1, best_keys = -1;
      std::size_t best_size = 0;
      for (std::size_t i = 0; i < r.pos.size(); ++i) {
        int keys = 0;
        if (pos_done[i] || !atom_ready(i, keys)) continue;
        std::size_t size = preds_[r.pos[i].pred].atoms.size();
        if (keys > best_keys || (keys == best_keys && size < best_size)) {
          best = static_cast<int>(i);
          best_keys = keys;
          best_size = size;
        }
      }
      if (best >= 0) {
        add_match(static_cast<std::size_t>(best));
        continue;
      }

      // Conditional literals: implications once everything is bound, or a
      // guard group assigning one variable.
      for (std::size_t i = 0; i < r.conds.size(); ++i) {
        if (cond_done[i]) continue;
        const CCond& c = r.conds[i];
        bool cond_bound = std::all_of(c.condition.begin(), c.condition.end(), [&](const CCompare& x) {
          return all_bound(x.lhs, bound) && all_bound(x.rhs, bound);
        });
        if (!cond_bound) continue;
        if (all_bound(c.head.lhs, bound) && all_bound(c.head.rhs, bound)) {
          plan.steps.push_back(make_step(Step::Kind::kImply, i));
          cond_done[i] = progress = true;
        }
      }
      if (progress) continue;

      for (std::size_t i = 0; i < r.conds.size() && !progress; ++i) {
        if (cond_done[i]) continue;
        const CCond& c = r.conds[i];
        int slot = -1;
        bool on_lhs = true;
        const CTerm* side = nullptr;
        if (c.head.op == CmpOp::kEq && assignable(c.head, bound, slot, on_lhs)) {
          side = on_lhs ? &c.head.lhs : &c.head.rhs;
        }
        if (side == nullptr || side->kind != CTerm::Kind::kVar) continue;
        Step s = make_step(Step::Kind::kGroup, i);
        s.slot = slot;
        for (std::size_t j = i; j < r.conds.size(); ++j) {
          if (cond_done[j]) continue;
          const CCond& o = r.conds[j];
          int oslot = -1;
          bool olhs = true;
          if (o.head.op != CmpOp::kEq || !assignable(o.head, bound, oslot, olhs) ||
              oslot != slot || (olhs ? o.head.lhs : o.head.rhs).kind != CTerm::Kind::kVar) {
            continue;
          }
          bool ob = std::all_of(o.condition.begin(), o.condition.end(), [&](const CCompare& x) {
            return all_bound(x.lhs, bound) && all_bound(x.rhs, bound);
          });
          if (!ob) continue;
          s.members.push_back(j);
          cond_done[j] = true;
        }
        plan.steps.push_back(std::move(s));
        bound[slot] = true;
        progress = true;
      }
      if (!progress) break;
    }

    bool done = std::all_of(pos_done.begin(), pos_done.end(), [](bool b) { return b; }) &&
                std::all_of(cmp_done.begin(), cmp_done.end(), [](bool b) { return b; }) &&
                std::all_of(cond_done.begin(), cond_done.end(), [](bool b) { return b; });
    bool head_safe = std::all_of(r.head.begin(), r.head.end(), [&](const CAtom& a) {
      return std::all_of(a.args.begin(), a.args.end(),
                         [&](const CTerm& t) { return all_bound(t, bound); });
    });
    if (!done || !head_safe) {
      throw SolveError(SolveError::Kind::kUnsafe, "unsafe variables in rule: " + r.text);
    }
    return plan;
  }

  // ---- evaluation ------------------------------------------------------
  bool eval(const CTerm& t, const std::vector<Value>& slots, Value& out) const {
    switch (t.kind) {
      case CTerm::Kind::kConst:
        out = t.value;
        return true;
      case CTerm::Kind::kVar:
        out = slots[t.slot];
        return true;
      case CTerm::Kind::kAnon:
      case CTerm::Kind::kInterval:
        return false;
      case CTerm::Kind::kUnary: {
        Value a;
        if (!eval(t.args[0], slots, a) || a.kind != Value::kInt) return false;
        if (a.v == std::numeric_limits<std::int64_t>::min()) return false;
        out = Value{Value::kInt, -a.v};
        return true;
      }
      case CTerm::Kind::kBinary: {
        Value a, b;
        if (!eval(t.args[0], slots, a) || !eval(t.args[1], slots, b)) return false;
        if (a.kind != Value::kInt || b.kind != Value::kInt) return false;
        std::int64_t r = 0;
        switch (t.op) {
          case '+':
            if (__builtin_add_overflow(a.v, b.v, &r)) return false;
            break;
          case '-':
            if (__builtin_sub_overflow(a.v, b.v, &r)) return false;
            break;
          case '*':
            if (__builtin_mul_overflow(a.v, b.v, &r)) return false;
            break;
          case '/':
            if (b.v == 0 || (a.v == std::numeric_limits<std::int64_t>::min() && b.v == -1)) return false;
            r = a.v / b.v;
            break;
          case '\\':
            if (b.v == 0 || (a.v == std::numeric_limits<std::int64_t>::min() && b.v == -1)) return false;
            r = a.v % b.v;
            break;
          default:
            return false;
        }
        out = Value{Value::kInt, r};
        return true;
      }
    }
    return false;
  }

  // Values of a term that may be an interval (heads, assignments).
  bool eval_multi(const CTerm& t, const std::vector<Value>& slots, std::vector<Value>& out) const {
    out.clear();
    if (t.kind != CTerm::Kind::kInterval) {
      Value v;
      if (!eval(t, slots, v)) return false;
      out.push_back(v);
      return true;
    }
    Value lo, hi;
    if (!eval(t.args[0], slots, lo) || !eval(t.args[1], slots, hi)) return false;
    if (lo.kind != Value::kInt || hi.kind != Value::kInt) return false;
    const std::int64_t dom = limits_.integer_domain;
    if (lo.v < -dom || hi.v > dom) {
      throw SolveError(SolveError::Kind::kResource,
                       "interval " + std::to_string(lo.v) + ".." + std::to_string(hi.v) +
                           " exceeds the integer domain");
    }
    for (std::int64_t v = lo.v; v <= hi.v; ++v) out.push_back(Value{Value::kInt, v});
    return true;
  }

  bool holds(const CCompare& c, const std::vector<Value>& slots) const {
    Value a, b;
    if (!eval(c.lhs, slots, a) || !eval(c.rhs, slots, b)) return false;
    int cmp = compare(a, b);
    switch (c.op) {
      case CmpOp::kEq: return cmp == 0;
      case CmpOp::kNeq: return cmp != 0;
      case CmpOp::kLt: return cmp < 0;
      case CmpOp::kLe: return cmp <= 0;
      case CmpOp::kGt: return cmp > 0;
      case CmpOp::kGe: return cmp >= 0;
    }
    return false;
  }

  // Solves `side = target` for the single unbound variable in `side`.
  bool solve_for(const CTerm& side, Value target, int slot, std::vector<Value>& slots) const {
    if (side.kind == CTerm::Kind::kVar) {
      slots[slot] = target;
      return true;
    }
    if (target.kind != Value::kInt) return false;
    if (side.kind == CTerm::Kind::kUnary) {
      if (target.v == std::numeric_limits<std::int64_t>::min()) return false;
      return solve_for(side.args[0], Value{Value::kInt, -target.v}, slot, slots);
    }
    std::vector<int> l;
    collect_slots(side.args[0], l);
    bool in_left = std::count(l.begin(), l.end(), slot) > 0;
    Value other;
    if (!eval(side.args[in_left ? 1 : 0], slots, other) || other.kind != Value::kInt) return false;
    std::int64_t next = 0;
    switch (side.op) {
      case '+':
        if (__builtin_sub_overflow(target.v, other.v, &next)) return false;
        break;
      case '-':
        if (in_left) {
          if (__builtin_add_overflow(target.v, other.v, &next)) return false;
        } else if (__builtin_sub_overflow(other.v, target.v, &next)) {
          return false;
        }
        break;
      case '*':
        if (other.v == 0) return false;  // zero coefficient: no unique value
        if (target.v % other.v != 0) return false;
        next = target.v / other.v;
        break;
      default:
        return false;
    }
    return solve_for(side.args[in_left ? 0 : 1], Value{Value::kInt, next}, slot, slots);
  }

  struct Frame {
    const CRule* rule;
    const Plan* plan;
    std::size_t delta_begin;
    std::size_t delta_end;
    std::vector<Value> slots;
    std::vector<std::uint32_t> body;
  };

  struct PendingRule {
    std::vector<std::pair<std::uint32_t, std::vector<Value>>> head;
    std::vector<std::uint32_t> body;
  };

  void evaluate(const CRule& r, const Plan& plan, std::size_t delta_begin, std::size_t delta_end) {
    Frame f{&r, &plan, delta_begin, delta_end, std::vector<Value>(r.num_slots), {}};
    pending_.clear();
    join(f, 0);
    for (PendingRule& p : pending_) commit(p);
    pending_.clear();
  }

  void join(Frame& f, std::size_t step_index) {
    if (step_index == f.plan->steps.size()) {
      emit(f);
      return;
    }
    const Step& s = f.plan->steps[step_index];
    const CRule& r = *f.rule;
    switch (s.kind) {
      case Step::Kind::kFilter:
        if (holds(r.cmps[s.index], f.slots)) join(f, step_index + 1);
        return;
      case Step::Kind::kAssign: {
        const CCompare& c = r.cmps[s.index];
        const CTerm& side = s.var_on_lhs ? c.lhs : c.rhs;
        const CTerm& other = s.var_on_lhs ? c.rhs : c.lhs;
        std::vector<Value> targets;
        if (!eval_multi(other, f.slots, targets)) return;
        for (Value t : targets) {
          if (solve_for(side, t, s.slot, f.slots)) join(f, step_index + 1);
        }
        return;
      }
      case Step::Kind::kImply: {
        const CCond& c = r.conds[s.index];
        bool fires = std::all_of(c.condition.begin(), c.condition.end(),
                                 [&](const CCompare& x) { return holds(x, f.slots); });
        if (!fires || holds(c.head, f.slots)) join(f, step_index + 1);
        return;
      }
      case Step::Kind::kGroup: {
        int fired = 0;
        Value chosen;
        for (std::size_t m : s.members) {
          const CCond& c = r.conds[m];
          bool fires = std::all_of(c.condition.begin(), c.condition.end(),
                                   [&](const CCompare& x) { return holds(x, f.slots); });
          if (!fires) continue;
          const CTerm& other = (c.head.lhs.kind == CTerm::Kind::kVar && c.head.lhs.slot == s.slot)
                                   ? c.head.rhs
                                   : c.head.lhs;
          Value v;
          if (!eval(other, f.slots, v)) return;
          if (fired++ == 0) chosen = v;
        }
        if (fired != 1) return;
        f.slots[s.slot] = chosen;
        join(f, step_index + 1);
        return;
      }
      case Step::Kind::kMatch:
        match(f, s, step_index);
        return;
    }
  }

  void match(Frame& f, const Step& s, std::size_t step_index) {
    const CAtom& atom = f.rule->pos[s.index];
    Pred& pred = preds_[atom.pred];
    const std::size_t arity = pred.arity;

    Value keys[32];
    std::uint64_t h = s.mask;
    for (std::size_t a = 0; a < arity; ++a) {
      if (s.actions[a].kind != ArgAction::kKey) continue;
      if (!eval(atom.args[a], f.slots, keys[a])) return;
      h = hash_value(h, keys[a]);
    }

    const std::vector<std::uint32_t>* list = &pred.atoms;
    if (s.mask != 0) {
      Index& idx = index_for(atom.pred, s.mask);
      auto it = idx.buckets.find(h);
      if (it == idx.buckets.end()) return;
      list = &it->second;
    }

    std::size_t lower = s.range == Range::kDelta ? f.delta_begin : 0;
    std::size_t upper = s.range == Range::kOld ? f.delta_begin : f.delta_end;
    auto start = std::lower_bound(list->begin(), list->end(), static_cast<std::uint32_t>(lower));
    for (std::size_t k = static_cast<std::size_t>(start - list->begin()); k < list->size(); ++k) {
      std::uint32_t id = (*list)[k];
      if (id >= upper) break;
      const std::size_t base = atom_begin_[id];
      bool ok = true;
      for (std::size_t a = 0; a < arity && ok; ++a) {
        const ArgAction& act = s.actions[a];
        Value v = values_[base + a];
        switch (act.kind) {
          case ArgAction::kKey:
            ok = v == keys[a];
            break;
          case ArgAction::kBind:
            f.slots[act.slot] = v;
            break;
          case ArgAction::kCheck:
            ok = f.slots[act.slot] == v;
            break;
          case ArgAction::kSkip:
            break;
        }
      }
      if (!ok) continue;
      f.body.push_back(id);
      join(f, step_index + 1);
      f.body.pop_back();
    }
  }

  void emit(Frame& f) {
    PendingRule p;
    std::vector<std::vector<Value>> per_arg;
    std::vector<Value> vals;
    for (const CAtom& h : f.rule->head) {
      per_arg.clear();
      for (const CTerm& t : h.args) {
        if (!eval_multi(t, f.slots, vals)) return;  // undefined arithmetic
        per_arg.push_back(vals);
      }
      // Cartesian product over interval arguments.
      std::vector<std::size_t> idx(per_arg.size(), 0);
      for (;;) {
        std::vector<Value> tuple(per_arg.size());
        for (std::size_t a = 0; a < per_arg.size(); ++a) tuple[a] = per_arg[a][idx[a]];
        p.head.emplace_back(h.pred, std::move(tuple));
        std::size_t a = 0;
        while (a < idx.size() && ++idx[a] == per_arg[a].size()) idx[a++] = 0;
        if (a == idx.size()) break;
      }
    }
    p.body = f.body;
    std::sort(p.body.begin(), p.body.end());
    p.body.erase(std::unique(p.body.begin(), p.body.end()), p.body.end());

    if (f.rule->head.size() <= 1 && p.head.size() > 1) {
      // Interval in a normal head: one ground rule per instance.
      for (auto& h : p.head) {
        PendingRule single;
        single.head.push_back(std::move(h));
        single.body = p.body;
        pending_.push_back(std::move(single));
      }
    } else {
      pending_.push_back(std::move(p));
    }
    if (pending_.size() + ground_.size() > limits_.max_ground_rules) {
      throw SolveError(SolveError::Kind::kResource, "ground rule limit exceeded");
    }
  }

  void commit(PendingRule& p) {
    GroundRule g;
    for (auto& [pred, vals] : p.head) g.head.push_back(add_atom(pred, vals));
    g.body = std::move(p.body);
    ground_.push_back(std::move(g));
  }

  std::uint64_t atom_hash(std::uint32_t pred, const Value* vals, std::size_t n) const {
    std::uint64_t h = pred + 1;
    for (std::size_t i = 0; i < n; ++i) h = hash_value(h, vals[i]);
    return h;
  }

  std::uint64_t key_hash(std::uint32_t mask, const Value* vals, std::size_t n) const {
    std::uint64_t h = mask;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) h = hash_value(h, vals[i]);
    }
    return h;
  }

  std::uint32_t add_atom(std::uint32_t pred, const std::vector<Value>& vals) {
    std::uint64_t h = atom_hash(pred, vals.data(), vals.size());
    auto& bucket = dedup_[h];
    for (std::uint32_t id : bucket) {
      if (atom_pred_[id] == pred &&
          std::equal(vals.begin(), vals.end(), values_.begin() + atom_begin_[id])) {
        return id;
      }
    }
    if (atom_pred_.size() >= limits_.max_atoms) {
      throw SolveError(SolveError::Kind::kResource,
                       "ground atom limit exceeded (" + std::to_string(limits_.max_atoms) + ")");
    }
    auto id = static_cast<std::uint32_t>(atom_pred_.size());
    bucket.push_back(id);
    atom_pred_.push_back(pred);
    atom_begin_.push_back(values_.size());
    values_.insert(values_.end(), vals.begin(), vals.end());
    Pred& p = preds_[pred];
    p.atoms.push_back(id);
    for (auto& [mask, idx] : p.indexes) {
      idx.buckets[key_hash(mask, vals.data(), vals.size())].push_back(id);
    }
    return id;
  }

  Index& index_for(std::uint32_t pred, std::uint32_t mask) {
    Pred& p = preds_[pred];
    auto [it, fresh] = p.indexes.try_emplace(mask);
    if (fresh) {
      for (std::uint32_t id : p.atoms) {
        it->second.buckets[key_hash(mask, values_.data() + atom_begin_[id], p.arity)].push_back(id);
      }
    }
    return it->second;
  }

  static bool has_atoms_in(const Pred& p, std::size_t lo, std::size_t hi) {
    auto it = std::lower_bound(p.atoms.begin(), p.atoms.end(), static_cast<std::uint32_t>(lo));
    return it != p.atoms.end() && *it < hi;
  }

  Symbol to_symbol(Value v) const {
    Symbol s;
    switch (v.kind) {
      case Value::kInt:
        s.kind = Symbol::Kind::kInteger;
        s.number = v.v;
        break;
      case Value::kConst:
        s.kind = Symbol::Kind::kConstant;
        s.text = names_[v.v];
        break;
      default:
        s.kind = Symbol::Kind::kString;
        s.text = names_[v.v];
        break;
    }
    return s;
  }

  GroundProgram export_program(std::size_t rounds) {
    GroundProgram out;
    out.iterations = rounds;
    out.atoms.reserve(atom_pred_.size());
    for (std::size_t id = 0; id < atom_pred_.size(); ++id) {
      const Pred& p = preds_[atom_pred_[id]];
      GroundAtom a;
      a.predicate = p.name;
      for (std::size_t i = 0; i < p.arity; ++i) a.args.push_back(to_symbol(values_[atom_begin_[id] + i]));
      out.atoms.push_back(std::move(a));
    }
    out.rules = std::move(ground_);
    return out;
  }

  Limits limits_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int64_t> name_ids_;
  std::vector<Pred> preds_;
  std::map<std::pair<std::string, std::size_t>, std::uint32_t> pred_ids_;
  std::vector<CRule> rules_;

  std::vector<Value> values_;
  std::vector<std::size_t> atom_begin_;
  std::vector<std::uint32_t> atom_pred_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> dedup_;

  std::vector<GroundRule> ground_;
  std::vector<PendingRule> pending_;
};

}  // namespace

GroundProgram ground(const Program& program, const Limits& limits) {
  return Grounder(program, limits).run();
}

}  // namespace clmasp::asp
