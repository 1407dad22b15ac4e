#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rhhlgp {

/// First-order-logic-style discrete layer: predicates, ground actions,
/// successor generation and goal tests.

struct Predicate {
  std::string name;
  int arity = 0;
};

struct Fact {
  std::string pred;
  std::vector<std::string> args;

  std::string str() const {
    std::string s = "(" + pred;
    for (const auto& a : args) s += " " + a;
    return s + ")";
  }
  auto operator<=>(const Fact&) const = default;
};

inline uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Duplicate-free fact set with an insertion-order-independent canonical id.
struct SymbolicState {
  std::vector<Fact> facts;  // sorted, unique
  uint64_t id = 0;

  static SymbolicState fromFacts(std::vector<Fact> fs) {
    std::sort(fs.begin(), fs.end());
    fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
    SymbolicState s;
    s.facts = std::move(fs);
    uint64_t h = 1469598103934665603ull;
    for (const auto& f : s.facts) h = fnv1a(f.str() + "|", h);
    s.id = h;
    return s;
  }
  bool contains(const Fact& f) const {
    return std::binary_search(facts.begin(), facts.end(), f);
  }
};

struct Literal {
  Fact fact;  // args may be variables (tokens starting with '?')
  bool negated = false;
};

enum class GeomTag { Pick, Place, Step, StepTogether, Connect, Disconnect, None };

inline std::string tagName(GeomTag t) {
  switch (t) {
    case GeomTag::Pick: return "pick";
    case GeomTag::Place: return "place";
    case GeomTag::Step: return "step";
    case GeomTag::StepTogether: return "stepTogether";
    case GeomTag::Connect: return "connect";
    case GeomTag::Disconnect: return "disconnect";
    case GeomTag::None: return "none";
  }
  return "none";
}

inline GeomTag tagFromName(const std::string& s) {
  if (s == "pick") return GeomTag::Pick;
  if (s == "place") return GeomTag::Place;
  if (s == "step") return GeomTag::Step;
  if (s == "stepTogether") return GeomTag::StepTogether;
  if (s == "connect") return GeomTag::Connect;
  if (s == "disconnect") return GeomTag::Disconnect;
  if (s == "none") return GeomTag::None;
  throw std::invalid_argument("unknown geometric tag: " + s);
}

struct Param {
  std::string var;
  std::string type;
};

struct ActionSchema {
  std::string name;
  std::vector<Param> params;
  std::vector<Literal> pre;
  std::vector<Fact> add;
  std::vector<Fact> del;
  GeomTag tag = GeomTag::None;
};

struct TypedObject {
  std::string name;
  std::string type;
};

/// Self-contained action instance: schema name/tag plus fully resolved
/// precondition and effect facts.
struct GroundAction {
  std::string name;
  GeomTag tag = GeomTag::None;
  std::vector<std::string> binding;
  std::string key;
  std::vector<Fact> prePos, preNeg, adds, dels;

  bool applicableIn(const SymbolicState& s) const {
    for (const auto& f : prePos)
      if (!s.contains(f)) return false;
    for (const auto& f : preNeg)
      if (s.contains(f)) return false;
    return true;
  }
};

struct Goal {
  std::vector<Fact> facts;
  bool multiGoal = false;

  static Goal fromFacts(std::vector<Fact> fs) {
    if (fs.empty()) throw std::invalid_argument("goal must be non-empty");
    std::sort(fs.begin(), fs.end());
    fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
    return {fs, fs.size() > 1};
  }
};

struct Domain {
  std::vector<Predicate> predicates;
  std::vector<ActionSchema> schemas;

  std::set<std::string> declaredTypes() const {
    std::set<std::string> t;
    for (const auto& s : schemas)
      for (const auto& p : s.params) t.insert(p.type);
    return t;
  }
  const Predicate* findPredicate(const std::string& name) const {
    for (const auto& p : predicates)
      if (p.name == name) return &p;
    return nullptr;
  }
};

namespace detail {

inline Fact substitute(const Fact& pattern, const std::map<std::string, std::string>& bind) {
  Fact f;
  f.pred = pattern.pred;
  f.args.reserve(pattern.args.size());
  for (const auto& a : pattern.args) {
    if (!a.empty() && a[0] == '?') {
      auto it = bind.find(a);
      if (it == bind.end()) throw std::logic_error("unbound variable " + a + " in " + pattern.str());
      f.args.push_back(it->second);
    } else {
      f.args.push_back(a);
    }
  }
  return f;
}

}  // namespace detail

/// Every type-consistent instantiation of every schema, ordered
/// lexicographically by key. Repeated bindings of one object are allowed.
inline std::vector<GroundAction> ground(const Domain& domain, const std::vector<TypedObject>& objects) {
  auto types = domain.declaredTypes();
  for (const auto& o : objects)
    if (!types.count(o.type))
      throw std::invalid_argument("object '" + o.name + "' has unknown type '" + o.type + "'");

  std::vector<GroundAction> out;
  for (const auto& schema : domain.schemas) {
    std::vector<std::vector<std::string>> candidates(schema.params.size());
    for (size_t i = 0; i < schema.params.size(); ++i)
      for (const auto& o : objects)
        if (o.type == schema.params[i].type) candidates[i].push_back(o.name);

    std::vector<size_t> idx(schema.params.size(), 0);
    bool any = true;
    for (const auto& c : candidates) any = any && !c.empty();
    if (schema.params.empty()) {
      idx.clear();
    } else if (!any) {
      continue;
    }
    while (true) {
      std::map<std::string, std::string> bind;
      GroundAction ga;
      ga.name = schema.name;
      ga.tag = schema.tag;
      for (size_t i = 0; i < idx.size(); ++i) {
        bind[schema.params[i].var] = candidates[i][idx[i]];
        ga.binding.push_back(candidates[i][idx[i]]);
      }
      ga.key = ga.name + "(";
      for (size_t i = 0; i < ga.binding.size(); ++i) ga.key += (i ? "," : "") + ga.binding[i];
      ga.key += ")";
      for (const auto& lit : schema.pre)
        (lit.negated ? ga.preNeg : ga.prePos).push_back(detail::substitute(lit.fact, bind));
      for (const auto& f : schema.add) ga.adds.push_back(detail::substitute(f, bind));
      for (const auto& f : schema.del) ga.dels.push_back(detail::substitute(f, bind));
      std::sort(ga.adds.begin(), ga.adds.end());
      std::sort(ga.dels.begin(), ga.dels.end());
      out.push_back(std::move(ga));

      if (idx.empty()) break;
      size_t k = idx.size();
      while (k > 0) {
        --k;
        if (++idx[k] < candidates[k].size()) break;
        idx[k] = 0;
        if (k == 0) goto nextSchema;
      }
      continue;
    nextSchema:
      break;
    }
  }
  std::sort(out.begin(), out.end(), [](const GroundAction& a, const GroundAction& b) { return a.key < b.key; });
  return out;
}

/// Exactly the actions whose positive preconditions are in the state and whose
/// negative preconditions are absent; preserves the grounded (stable) order.
inline std::vector<const GroundAction*> applicable(const SymbolicState& state,
                                                   const std::vector<GroundAction>& actions) {
  std::vector<const GroundAction*> out;
  for (const auto& a : actions)
    if (a.applicableIn(state)) out.push_back(&a);
  return out;
}

/// Successor state: (facts \ deletes) "union" adds. The input is unmodified.
inline SymbolicState apply(const SymbolicState& state, const GroundAction& action) {
  if (!action.applicableIn(state))
    throw std::logic_error("apply: action " + action.key + " not applicable in state");
  std::vector<Fact> facts;
  facts.reserve(state.facts.size() + action.adds.size());
  for (const auto& f : state.facts)
    if (!std::binary_search(action.dels.begin(), action.dels.end(), f)) facts.push_back(f);
  for (const auto& f : action.adds) facts.push_back(f);
  return SymbolicState::fromFacts(std::move(facts));
}

inline bool isGoal(const SymbolicState& state, const Goal& goal) {
  for (const auto& f : goal.facts)
    if (!state.contains(f)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Domain/problem text format. One declaration per line, '#' comments:
//   predicate <name> <arity>
//   action <name> (<var> <type> ...) pre: <literals> add: <literals> del: <literals> tag: <tag>
//   object <name> <type>
//   init: <facts>
//   goal: <facts>
// Literals are written (pred a b); a '!' prefix negates a precondition.
// ---------------------------------------------------------------------------

struct ParsedTask {
  Domain domain;
  std::vector<TypedObject> objects;
  SymbolicState init;
  Goal goal;
};

namespace detail {

inline std::vector<std::string> tokenizeSexprs(const std::string& text) {
  // splits "(a b) !(c d)" into "(a b)", "!(c d)"
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    bool neg = text[i] == '!';
    size_t start = i;
    if (neg) ++i;
    if (i >= text.size() || text[i] != '(')
      throw std::invalid_argument("expected '(' in literal list: " + text);
    size_t close = text.find(')', i);
    if (close == std::string::npos) throw std::invalid_argument("unbalanced '(' in: " + text);
    out.push_back(text.substr(start, close - start + 1));
    i = close + 1;
  }
  return out;
}

inline Literal parseLiteral(const std::string& tok) {
  Literal lit;
  std::string body = tok;
  if (!body.empty() && body[0] == '!') {
    lit.negated = true;
    body = body.substr(1);
  }
  if (body.size() < 2 || body.front() != '(' || body.back() != ')')
    throw std::invalid_argument("malformed literal: " + tok);
  std::istringstream is(body.substr(1, body.size() - 2));
  std::string w;
  bool first = true;
  while (is >> w) {
    if (first) {
      lit.fact.pred = w;
      first = false;
    } else {
      lit.fact.args.push_back(w);
    }
  }
  if (first) throw std::invalid_argument("empty literal");
  return lit;
}

}  // namespace detail

inline ParsedTask parseTask(const std::string& text) {
  ParsedTask task;
  std::vector<Fact> initFacts, goalFacts;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    try {
      if (head == "predicate") {
        Predicate p;
        ls >> p.name >> p.arity;
        if (p.arity < 0 || p.arity > 3) throw std::invalid_argument("predicate arity must be 0..3");
        for (const auto& q : task.domain.predicates)
          if (q.name == p.name) throw std::invalid_argument("duplicate predicate " + p.name);
        task.domain.predicates.push_back(p);
      } else if (head == "object") {
        TypedObject o;
        ls >> o.name >> o.type;
        task.objects.push_back(o);
      } else if (head == "action") {
        ActionSchema schema;
        ls >> schema.name;
        std::string rest;
        std::getline(ls, rest);
        auto open = rest.find('(');
        auto close = rest.find(')');
        if (open == std::string::npos || close == std::string::npos)
          throw std::invalid_argument("action needs a (param type ...) list");
        {
          std::istringstream ps(rest.substr(open + 1, close - open - 1));
          std::string var, type;
          while (ps >> var >> type) {
            if (var.empty() || var[0] != '?') throw std::invalid_argument("parameter must start with '?'");
            schema.params.push_back({var, type});
          }
        }
        std::string body = rest.substr(close + 1);
        auto section = [&](const std::string& k) -> std::string {
          auto p = body.find(k);
          if (p == std::string::npos) return "";
          size_t start = p + k.size();
          size_t end = body.size();
          for (const char* other : {"pre:", "add:", "del:", "tag:"}) {
            auto q = body.find(other, start);
            if (q != std::string::npos) end = std::min(end, q);
          }
          return body.substr(start, end - start);
        };
        for (const auto& tok : detail::tokenizeSexprs(section("pre:"))) schema.pre.push_back(detail::parseLiteral(tok));
        for (const auto& tok : detail::tokenizeSexprs(section("add:"))) schema.add.push_back(detail::parseLiteral(tok).fact);
        for (const auto& tok : detail::tokenizeSexprs(section("del:"))) schema.del.push_back(detail::parseLiteral(tok).fact);
        std::string tag;
        std::istringstream ts(section("tag:"));
        ts >> tag;
        schema.tag = tag.empty() ? GeomTag::None : tagFromName(tag);

        // every variable used must be a declared parameter
        auto checkVars = [&](const Fact& f) {
          for (const auto& a : f.args)
            if (!a.empty() && a[0] == '?') {
              bool found = false;
              for (const auto& p : schema.params) found = found || p.var == a;
              if (!found) throw std::invalid_argument("variable " + a + " of " + schema.name + " not in parameters");
            }
        };
        for (const auto& l : schema.pre) checkVars(l.fact);
        for (const auto& f : schema.add) checkVars(f);
        for (const auto& f : schema.del) checkVars(f);
        for (const auto& f : schema.add)
          for (const auto& g : schema.del)
            if (f == g) throw std::invalid_argument(schema.name + ": literal " + f.str() + " both added and deleted");
        task.domain.schemas.push_back(std::move(schema));
      } else if (head == "init:") {
        std::string rest;
        std::getline(ls, rest);
        for (const auto& tok : detail::tokenizeSexprs(rest)) initFacts.push_back(detail::parseLiteral(tok).fact);
      } else if (head == "goal:") {
        std::string rest;
        std::getline(ls, rest);
        for (const auto& tok : detail::tokenizeSexprs(rest)) goalFacts.push_back(detail::parseLiteral(tok).fact);
      } else {
        throw std::invalid_argument("unknown declaration '" + head + "'");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("domain file line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  task.init = SymbolicState::fromFacts(std::move(initFacts));
  task.goal = Goal::fromFacts(std::move(goalFacts));
  return task;
}

// Binding role conventions per geometric tag, used by the NLP builder and the
// heuristics. Validated on load.
//   pick:         [robot, object, stance, source]
//   place:        [robot, object, dest, stance]
//   step:         [robot, from, to]
//   stepTogether: [lead, mate, from, to]     (lead currently holds support)
//   connect:      [a, b, stanceA, stanceB]
//   disconnect:   [a, b, landing]
inline void validateTagArities(const Domain& domain) {
  for (const auto& s : domain.schemas) {
    size_t want = 0;
    switch (s.tag) {
      case GeomTag::Pick: want = 4; break;
      case GeomTag::Place: want = 4; break;
      case GeomTag::Step: want = 3; break;
      case GeomTag::StepTogether: want = 4; break;
      case GeomTag::Connect: want = 4; break;
      case GeomTag::Disconnect: want = 3; break;
      case GeomTag::None: continue;
    }
    if (s.params.size() != want)
      throw std::invalid_argument("action " + s.name + " with tag " + tagName(s.tag) + " needs " +
                                  std::to_string(want) + " parameters");
  }
}

inline const std::string& actionRobot(const GroundAction& a) { return a.binding.at(0); }

}  // namespace rhhlgp
