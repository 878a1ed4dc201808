#include <algorithm>
#include <cctype>
#include <memory>
#include <sstream>

#include "realism/error.hpp"
#include "realism/planner.hpp"

namespace realism {

std::string pddl_name(const std::string& trait_id) {
  bool ok = !trait_id.empty() && trait_id.front() >= 'a' && trait_id.front() <= 'z';
  for (char c : trait_id)
    ok = ok && ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.');
  if (!ok) throw NamingError("trait id '" + trait_id + "' cannot be expressed as a PDDL name (expected [a-z][a-z0-9_.]*)");
  std::string out = trait_id;
  std::replace(out.begin(), out.end(), '.', '-');
  return out;
}

std::string trait_from_pddl(const std::string& name) {
  std::string out = name;
  std::replace(out.begin(), out.end(), '-', '.');
  return out;
}

namespace {

std::string atom(const std::string& trait) { return "(" + pddl_name(trait) + ")"; }

std::string literal(const Literal& l) { return l.value ? atom(l.trait) : "(not " + atom(l.trait) + ")"; }

std::string conjunction(const std::vector<Literal>& ls) {
  if (ls.size() == 1) return literal(ls.front());
  std::string out = "(and";
  for (const auto& l : ls) out += " " + literal(l);
  return out + ")";
}

std::string action_pddl_name(const StripsAction& a) { return to_string(a.op) + "-" + pddl_name(a.trait); }

}  // namespace

std::string emit_domain_pddl(const StripsDomain& domain) {
  std::ostringstream out;
  out << "(define (domain " << domain.name << ")\n";
  out << "  (:requirements :strips :negative-preconditions)\n";
  out << "  (:predicates";
  for (const auto& p : domain.predicates) out << "\n    " << atom(p);
  out << ")\n";
  for (const auto& a : domain.actions) {
    out << "  (:action " << action_pddl_name(a) << "\n";
    out << "    :parameters ()\n";
    out << "    :precondition " << conjunction(a.preconditions) << "\n";
    out << "    :effect " << conjunction(a.effects) << ")\n";
  }
  out << ")\n";
  return out.str();
}

std::string emit_problem_pddl(const StripsDomain& domain, const PlanProblem& problem) {
  const std::size_t n = domain.predicates.size();
  if (problem.initial.size() != n || problem.goal.size() != n) {
    throw ShapeError("plan problem does not match the domain's " + std::to_string(n) + " predicates");
  }
  if (problem.constrained() == 0) throw ValidationError("problem goal constrains no traits; nothing to plan");
  std::ostringstream out;
  out << "(define (problem " << problem.name << ")\n";
  out << "  (:domain " << domain.name << ")\n";
  out << "  (:init";
  for (std::size_t i = 0; i < n; ++i)
    if (problem.initial[i]) out << "\n    " << atom(domain.predicates[i]);
  out << ")\n";
  out << "  (:goal (and";
  for (std::size_t i = 0; i < n; ++i)
    if (problem.goal[i]) out << "\n    " << literal({domain.predicates[i], *problem.goal[i]});
  out << ")))\n";
  return out.str();
}

PddlText emit_pddl(const KnowledgeGraph& graph, const PlanProblem& problem) {
  const StripsDomain domain = compile_domain(graph);
  return {emit_domain_pddl(domain), emit_problem_pddl(domain, problem)};
}

// ---------------------------------------------------------------------------
// Reader

namespace {

struct Sexp {
  std::string atom;  // empty for lists
  std::vector<Sexp> items;
  std::size_t line = 1, col = 1;

  bool is_list() const { return atom.empty(); }
  std::string where() const { return std::to_string(line) + ":" + std::to_string(col); }
};

class Lexer {
 public:
  Lexer(const std::string& text, std::string what) : text_(text), what_(std::move(what)) {}

  Sexp read_document() {
    skip();
    if (pos_ >= text_.size()) fail("empty document");
    Sexp top = read();
    skip();
    if (pos_ < text_.size()) fail("trailing content after top-level form");
    return top;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(what_ + ":" + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg);
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Sexp read() {
    Sexp node;
    node.line = line_;
    node.col = col_;
    if (text_[pos_] == ')') fail("unexpected ')'");
    if (text_[pos_] == '(') {
      advance();
      for (;;) {
        skip();
        if (pos_ >= text_.size()) fail("unterminated list opened at " + node.where());
        if (text_[pos_] == ')') {
          advance();
          return node;
        }
        node.items.push_back(read());
      }
    }
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || c == ';' || std::isspace(static_cast<unsigned char>(c))) break;
      node.atom += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      advance();
    }
    return node;
  }

  const std::string& text_;
  std::string what_;
  std::size_t pos_ = 0, line_ = 1, col_ = 1;
};

[[noreturn]] void fail_at(const std::string& what, const Sexp& s, const std::string& msg) {
  throw ParseError(what + ":" + s.where() + ": " + msg);
}

const Sexp& expect_list(const std::string& what, const Sexp& s, const char* role) {
  if (!s.is_list()) fail_at(what, s, std::string("expected ") + role + ", got '" + s.atom + "'");
  return s;
}

const std::string& expect_atom(const std::string& what, const Sexp& s, const char* role) {
  if (s.is_list()) fail_at(what, s, std::string("expected ") + role + ", got a list");
  return s.atom;
}

// (define (<kind> <name>) ...) -> name; body items start at index 2.
std::string read_header(const std::string& what, const Sexp& top, const char* kind) {
  expect_list(what, top, "(define ...)");
  if (top.items.size() < 2 || top.items[0].atom != "define") fail_at(what, top, "expected (define ...)");
  const Sexp& head = expect_list(what, top.items[1], std::string("(" + std::string(kind) + " <name>)").c_str());
  if (head.items.size() != 2 || head.items[0].atom != kind) {
    fail_at(what, head, std::string("expected (") + kind + " <name>)");
  }
  return expect_atom(what, head.items[1], "a name");
}

std::string section_key(const std::string& what, const Sexp& s) {
  expect_list(what, s, "a section");
  if (s.items.empty() || s.items[0].is_list()) fail_at(what, s, "expected a ':keyword' section");
  return s.items[0].atom;
}

std::size_t zero_arity(const std::string& what, const Sexp& s, const std::vector<std::string>& predicates) {
  expect_list(what, s, "an atom like (name)");
  if (s.items.size() != 1 || s.items[0].is_list()) {
    fail_at(what, s, "only zero-arity predicates are supported");
  }
  const std::string trait = trait_from_pddl(s.items[0].atom);
  auto it = std::find(predicates.begin(), predicates.end(), trait);
  if (it == predicates.end()) fail_at(what, s, "undeclared predicate '" + s.items[0].atom + "'");
  return static_cast<std::size_t>(it - predicates.begin());
}

std::vector<std::pair<std::size_t, bool>> read_literals(const std::string& what, const Sexp& s,
                                                       const std::vector<std::string>& predicates, bool allow_negation) {
  expect_list(what, s, "a formula");
  std::vector<std::pair<std::size_t, bool>> out;
  if (!s.items.empty() && s.items[0].atom == "and") {
    for (std::size_t i = 1; i < s.items.size(); ++i) {
      auto sub = read_literals(what, s.items[i], predicates, allow_negation);
      if (s.items[i].items.size() > 0 && s.items[i].items[0].atom == "and") fail_at(what, s.items[i], "nested 'and'");
      out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
  }
  if (!s.items.empty() && s.items[0].atom == "not") {
    if (!allow_negation) fail_at(what, s, "negative literal not allowed here");
    if (s.items.size() != 2) fail_at(what, s, "'not' takes one atom");
    out.emplace_back(zero_arity(what, s.items[1], predicates), false);
    return out;
  }
  out.emplace_back(zero_arity(what, s, predicates), true);
  return out;
}

std::vector<Literal> to_literals(const std::string& what, const Sexp& where,
                                 std::vector<std::pair<std::size_t, bool>> ls,
                                 const std::vector<std::string>& predicates) {
  std::sort(ls.begin(), ls.end());
  std::vector<Literal> out;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (i > 0 && ls[i].first == ls[i - 1].first) {
      if (ls[i].second != ls[i - 1].second) fail_at(what, where, "contradictory literals on " + predicates[ls[i].first]);
      continue;
    }
    out.push_back({predicates[ls[i].first], ls[i].second});
  }
  return out;
}

const std::vector<std::string> kSupportedRequirements = {":strips", ":negative-preconditions"};

}  // namespace

StripsDomain parse_domain_pddl(const std::string& text) {
  const std::string what = "domain";
  const Sexp top = Lexer(text, what).read_document();
  StripsDomain domain;
  domain.name = read_header(what, top, "domain");
  bool have_predicates = false;

  for (std::size_t i = 2; i < top.items.size(); ++i) {
    const Sexp& sec = top.items[i];
    const std::string key = section_key(what, sec);
    if (key == ":requirements") {
      for (std::size_t r = 1; r < sec.items.size(); ++r) {
        const std::string& req = expect_atom(what, sec.items[r], "a requirement flag");
        if (std::find(kSupportedRequirements.begin(), kSupportedRequirements.end(), req) ==
            kSupportedRequirements.end()) {
          fail_at(what, sec.items[r], "unsupported requirement " + req);
        }
      }
    } else if (key == ":predicates") {
      if (have_predicates) fail_at(what, sec, "duplicate :predicates section");
      have_predicates = true;
      for (std::size_t p = 1; p < sec.items.size(); ++p) {
        const Sexp& pred = expect_list(what, sec.items[p], "a predicate (name)");
        if (pred.items.size() != 1 || pred.items[0].is_list()) {
          fail_at(what, pred, "only zero-arity predicates are supported");
        }
        const std::string trait = trait_from_pddl(pred.items[0].atom);
        if (std::find(domain.predicates.begin(), domain.predicates.end(), trait) != domain.predicates.end()) {
          fail_at(what, pred, "duplicate predicate '" + pred.items[0].atom + "'");
        }
        domain.predicates.push_back(trait);
      }
    } else if (key == ":action") {
      if (!have_predicates) fail_at(what, sec, ":action before :predicates");
      if (sec.items.size() < 2) fail_at(what, sec, "action without a name");
      const std::string& name = expect_atom(what, sec.items[1], "an action name");
      StripsAction action;
      std::string rest;
      if (name.rfind("enable-", 0) == 0) {
        action.op = PlanOp::enable;
        rest = name.substr(7);
      } else if (name.rfind("disable-", 0) == 0) {
        action.op = PlanOp::disable;
        rest = name.substr(8);
      } else {
        fail_at(what, sec.items[1], "action name must start with enable- or disable-");
      }
      action.trait = trait_from_pddl(rest);
      if (!domain.predicate_index(action.trait)) fail_at(what, sec.items[1], "action on undeclared trait '" + rest + "'");
      action.name = action_name(action.op, action.trait);
      if (domain.find_action(action.name)) fail_at(what, sec.items[1], "duplicate action '" + name + "'");

      bool have_pre = false, have_eff = false;
      for (std::size_t k = 2; k < sec.items.size(); k += 2) {
        const std::string& field = expect_atom(what, sec.items[k], "an action field");
        if (k + 1 >= sec.items.size()) fail_at(what, sec.items[k], "missing value for " + field);
        const Sexp& value = sec.items[k + 1];
        if (field == ":parameters") {
          if (!value.is_list() || !value.items.empty()) fail_at(what, value, "only parameterless actions are supported");
        } else if (field == ":precondition") {
          action.preconditions =
              to_literals(what, value, read_literals(what, value, domain.predicates, true), domain.predicates);
          have_pre = true;
        } else if (field == ":effect") {
          action.effects =
              to_literals(what, value, read_literals(what, value, domain.predicates, true), domain.predicates);
          have_eff = true;
        } else {
          fail_at(what, sec.items[k], "unsupported action field " + field);
        }
      }
      if (!have_eff) fail_at(what, sec, "action '" + name + "' has no :effect");
      if (!have_pre) action.preconditions.clear();
      domain.actions.push_back(std::move(action));
    } else {
      fail_at(what, sec, "unsupported domain section " + key);
    }
  }
  if (!have_predicates) fail_at(what, top, "domain declares no :predicates");
  return domain;
}

PlanProblem parse_problem_pddl(const std::string& text, const StripsDomain& domain) {
  const std::string what = "problem";
  const Sexp top = Lexer(text, what).read_document();
  PlanProblem problem;
  problem.name = read_header(what, top, "problem");
  const std::size_t n = domain.predicates.size();
  problem.initial.assign(n, false);
  problem.goal.assign(n, std::nullopt);
  bool have_goal = false;

  for (std::size_t i = 2; i < top.items.size(); ++i) {
    const Sexp& sec = top.items[i];
    const std::string key = section_key(what, sec);
    if (key == ":domain") {
      if (sec.items.size() != 2 || expect_atom(what, sec.items[1], "a domain name") != domain.name) {
        fail_at(what, sec, "problem refers to a different domain than '" + domain.name + "'");
      }
    } else if (key == ":requirements") {
      for (std::size_t r = 1; r < sec.items.size(); ++r) {
        const std::string& req = expect_atom(what, sec.items[r], "a requirement flag");
        if (std::find(kSupportedRequirements.begin(), kSupportedRequirements.end(), req) ==
            kSupportedRequirements.end()) {
          fail_at(what, sec.items[r], "unsupported requirement " + req);
        }
      }
    } else if (key == ":objects") {
      if (sec.items.size() > 1) fail_at(what, sec, "objects are not supported");
    } else if (key == ":init") {
      for (std::size_t f = 1; f < sec.items.size(); ++f)
        problem.initial[zero_arity(what, sec.items[f], domain.predicates)] = true;
    } else if (key == ":goal") {
      if (sec.items.size() != 2) fail_at(what, sec, ":goal takes one formula");
      for (const auto& [idx, value] : read_literals(what, sec.items[1], domain.predicates, true)) {
        if (problem.goal[idx] && *problem.goal[idx] != value) {
          fail_at(what, sec, "contradictory goal literals on " + domain.predicates[idx]);
        }
        problem.goal[idx] = value;
      }
      have_goal = true;
    } else {
      fail_at(what, sec, "unsupported problem section " + key);
    }
  }
  if (!have_goal) fail_at(what, top, "problem has no :goal");
  if (problem.constrained() == 0) throw ValidationError("problem goal constrains no traits; nothing to plan");
  return problem;
}

std::pair<StripsDomain, PlanProblem> parse_pddl(const std::string& domain_text, const std::string& problem_text) {
  StripsDomain domain = parse_domain_pddl(domain_text);
  PlanProblem problem = parse_problem_pddl(problem_text, domain);
  return {std::move(domain), std::move(problem)};
}

std::vector<std::string> parse_plan_file(const std::string& text) {
  std::vector<std::string> actions;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto semi = line.find(';'); semi != std::string::npos) line.resize(semi);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string body = line.substr(first, last - first + 1);
    if (body.size() < 2 || body.front() != '(' || body.back() != ')') {
      throw ParseError("plan:" + std::to_string(lineno) + ": expected '(action-name)'");
    }
    body = body.substr(1, body.size() - 2);
    const auto a = body.find_first_not_of(" \t");
    const auto b = body.find_last_not_of(" \t");
    if (a == std::string::npos) throw ParseError("plan:" + std::to_string(lineno) + ": empty action");
    body = body.substr(a, b - a + 1);
    if (body.find_first_of(" \t()") != std::string::npos) {
      throw ParseError("plan:" + std::to_string(lineno) + ": only parameterless actions are supported");
    }
    std::transform(body.begin(), body.end(), body.begin(), [](unsigned char c) { return std::tolower(c); });
    std::string op = body.rfind("enable-", 0) == 0 ? "enable-" : body.rfind("disable-", 0) == 0 ? "disable-" : "";
    if (op.empty()) throw ParseError("plan:" + std::to_string(lineno) + ": unknown action '" + body + "'");
    actions.push_back(op + trait_from_pddl(body.substr(op.size())));
  }
  return actions;
}

}  // namespace realism
