#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "realism/ontology.hpp"

namespace realism {

struct Literal {
  std::string trait;
  bool value = true;

  bool operator==(const Literal&) const = default;
};

enum class PlanOp { enable, disable };

std::string to_string(PlanOp op);

// "enable-<trait id>" / "disable-<trait id>"
std::string action_name(PlanOp op, const std::string& trait_id);

struct StripsAction {
  std::string name;
  std::string trait;
  PlanOp op = PlanOp::enable;
  std::vector<Literal> preconditions;  // sorted by predicate index
  std::vector<Literal> effects;

  bool operator==(const StripsAction&) const = default;
};

struct StripsDomain {
  std::string name = "realism";
  std::vector<std::string> predicates;  // trait ids in node order
  std::vector<StripsAction> actions;    // enable/disable per trait, node order

  std::optional<std::size_t> predicate_index(const std::string& trait) const;
  const StripsAction* find_action(const std::string& name) const;

  bool operator==(const StripsDomain&) const = default;
};

// enable-t requires t false, every trait opposing t false, and every
// prerequisite supporter of t true. disable-t requires only t true.
StripsDomain compile_domain(const KnowledgeGraph& graph);

using TraitState = std::vector<bool>;
using PartialState = std::vector<std::optional<bool>>;

struct PlanProblem {
  std::string name = "realism-problem";
  TraitState initial;
  PartialState goal;  // nullopt = unconstrained

  std::size_t constrained() const;
  bool operator==(const PlanProblem&) const = default;
};

bool satisfies(const TraitState& state, const PartialState& goal);

// Initial state from p_s. By default the goal constrains only the traits whose
// binarized value differs; with `strict` it constrains every trait to b_t.
PlanProblem diff_states(std::span<const double> p_source, std::span<const double> p_target, double threshold,
                        bool strict = false);

enum class PlanStatus { solved, infeasible, already_satisfied };

std::string to_string(PlanStatus s);

struct Plan {
  PlanStatus status = PlanStatus::infeasible;
  std::vector<std::string> actions;
  std::size_t cost = 0;

  bool operator==(const Plan&) const = default;
};

inline constexpr std::size_t kMaxPlannerTraits = 24;

// Optimal A* over the 2^N state space with the goal-count heuristic. Among
// equal-cost plans the one whose action-name sequence is lexicographically
// smallest is returned. Throws CapacityError above kMaxPlannerTraits.
Plan solve(const PlanProblem& problem, const StripsDomain& domain);

// Literal-by-literal execution of named actions; used to validate plans,
// including ones imported from an external planner.
struct Simulation {
  bool valid = false;
  std::string error;
  TraitState final_state;
};

Simulation simulate(const StripsDomain& domain, const TraitState& initial, std::span<const std::string> actions);

// Checks an externally produced action sequence and wraps it as a Plan.
// Throws ValidationError when it is inapplicable or misses the goal.
Plan validate_plan(const PlanProblem& problem, const StripsDomain& domain, std::vector<std::string> actions);

std::string plan_json(const Plan& plan, const std::string* prompt = nullptr);
Plan parse_plan_json(const std::string& text);

// ---------------------------------------------------------------------------
// PDDL (STRIPS subset with negative preconditions)

// Trait id -> PDDL name ('.' becomes '-'). Ids must match [a-z][a-z0-9_.]*.
std::string pddl_name(const std::string& trait_id);
std::string trait_from_pddl(const std::string& name);

std::string emit_domain_pddl(const StripsDomain& domain);
std::string emit_problem_pddl(const StripsDomain& domain, const PlanProblem& problem);

struct PddlText {
  std::string domain;
  std::string problem;
};

PddlText emit_pddl(const KnowledgeGraph& graph, const PlanProblem& problem);

StripsDomain parse_domain_pddl(const std::string& text);
PlanProblem parse_problem_pddl(const std::string& text, const StripsDomain& domain);
std::pair<StripsDomain, PlanProblem> parse_pddl(const std::string& domain_text, const std::string& problem_text);

// One "(action-name)" per line, ';' comments (e.g. "; cost = 2 (unit cost)").
std::vector<std::string> parse_plan_file(const std::string& text);

}  // namespace realism
