#include "realism/planner.hpp"

#include <algorithm>
#include <cstdint>
#include <queue>
#include <unordered_map>

#include "json_util.hpp"
#include "realism/error.hpp"

namespace realism {

std::string to_string(PlanOp op) { return op == PlanOp::enable ? "enable" : "disable"; }

std::string action_name(PlanOp op, const std::string& trait_id) { return to_string(op) + "-" + trait_id; }

std::string to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::solved: return "solved";
    case PlanStatus::infeasible: return "infeasible";
    case PlanStatus::already_satisfied: return "already_satisfied";
  }
  return "infeasible";
}

std::optional<std::size_t> StripsDomain::predicate_index(const std::string& trait) const {
  for (std::size_t i = 0; i < predicates.size(); ++i)
    if (predicates[i] == trait) return i;
  return std::nullopt;
}

const StripsAction* StripsDomain::find_action(const std::string& action) const {
  for (const auto& a : actions)
    if (a.name == action) return &a;
  return nullptr;
}

StripsDomain compile_domain(const KnowledgeGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<std::vector<std::size_t>> opposing(n);
  std::vector<std::vector<std::size_t>> prerequisites(n);
  const auto& relations = graph.relations();
  for (std::size_t e = 0; e < relations.size(); ++e) {
    const auto [s, d] = graph.relation_endpoints()[e];
    if (relations[e].kind == RelationKind::opposes) {
      opposing[s].push_back(d);
      opposing[d].push_back(s);
    } else if (relations[e].prerequisite) {
      prerequisites[d].push_back(s);
    }
  }

  StripsDomain domain;
  for (const auto& t : graph.traits()) domain.predicates.push_back(t.id);
  for (std::size_t t = 0; t < n; ++t) {
    const std::string& id = graph.trait(t).id;
    // Index-keyed so every precondition set comes out sorted by node order.
    std::vector<std::optional<bool>> required(n);
    required[t] = false;
    for (std::size_t u : opposing[t]) required[u] = false;
    for (std::size_t v : prerequisites[t]) required[v] = true;

    StripsAction enable{action_name(PlanOp::enable, id), id, PlanOp::enable, {}, {{id, true}}};
    for (std::size_t i = 0; i < n; ++i)
      if (required[i]) enable.preconditions.push_back({graph.trait(i).id, *required[i]});
    domain.actions.push_back(std::move(enable));
    domain.actions.push_back({action_name(PlanOp::disable, id), id, PlanOp::disable, {{id, true}}, {{id, false}}});
  }
  return domain;
}

std::size_t PlanProblem::constrained() const {
  return static_cast<std::size_t>(std::count_if(goal.begin(), goal.end(), [](const auto& g) { return g.has_value(); }));
}

bool satisfies(const TraitState& state, const PartialState& goal) {
  if (state.size() != goal.size()) throw ShapeError("satisfies: state and goal lengths differ");
  for (std::size_t i = 0; i < goal.size(); ++i)
    if (goal[i] && *goal[i] != state[i]) return false;
  return true;
}

PlanProblem diff_states(std::span<const double> p_source, std::span<const double> p_target, double threshold,
                        bool strict) {
  if (p_source.size() != p_target.size()) {
    throw ShapeError("diff_states: source has " + std::to_string(p_source.size()) + " traits, target has " +
                     std::to_string(p_target.size()));
  }
  PlanProblem problem;
  problem.initial.resize(p_source.size());
  problem.goal.resize(p_source.size());
  for (std::size_t i = 0; i < p_source.size(); ++i) {
    const bool source = p_source[i] >= threshold;
    const bool target = p_target[i] >= threshold;
    problem.initial[i] = source;
    if (strict || source != target) problem.goal[i] = target;
  }
  return problem;
}

// ---------------------------------------------------------------------------
// Search

namespace {

struct CompiledAction {
  std::uint32_t need_true = 0;
  std::uint32_t need_false = 0;
  std::uint32_t bit = 0;
  bool sets = true;
  std::size_t source = 0;  // index into domain.actions
};

struct Node {
  std::size_t f;
  std::vector<std::uint16_t> path;  // indices into the name-sorted action list
  std::uint32_t state;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.f != b.f) return a.f > b.f;
    return a.path > b.path;
  }
};

std::uint32_t literal_bit(const StripsDomain& domain, const std::string& trait) {
  auto i = domain.predicate_index(trait);
  if (!i) throw ValidationError("action references unknown predicate '" + trait + "'");
  return std::uint32_t{1} << *i;
}

}  // namespace

Plan solve(const PlanProblem& problem, const StripsDomain& domain) {
  const std::size_t n = domain.predicates.size();
  if (n > kMaxPlannerTraits) {
    throw CapacityError("planner supports at most " + std::to_string(kMaxPlannerTraits) + " traits (got " +
                        std::to_string(n) + "); export PDDL and use an external planner");
  }
  if (problem.initial.size() != n || problem.goal.size() != n) {
    throw ShapeError("plan problem does not match the domain's " + std::to_string(n) + " predicates");
  }

  std::vector<CompiledAction> actions;
  for (std::size_t a = 0; a < domain.actions.size(); ++a) {
    const auto& src = domain.actions[a];
    CompiledAction c;
    c.source = a;
    for (const auto& l : src.preconditions) (l.value ? c.need_true : c.need_false) |= literal_bit(domain, l.trait);
    if (src.effects.size() != 1) throw ValidationError("action '" + src.name + "' must have exactly one effect");
    c.bit = literal_bit(domain, src.effects.front().trait);
    c.sets = src.effects.front().value;
    actions.push_back(c);
  }
  std::sort(actions.begin(), actions.end(), [&](const CompiledAction& a, const CompiledAction& b) {
    return domain.actions[a.source].name < domain.actions[b.source].name;
  });

  std::uint32_t start = 0, goal_mask = 0, goal_value = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (problem.initial[i]) start |= std::uint32_t{1} << i;
    if (problem.goal[i]) {
      goal_mask |= std::uint32_t{1} << i;
      if (*problem.goal[i]) goal_value |= std::uint32_t{1} << i;
    }
  }
  auto unsatisfied = [&](std::uint32_t s) {
    return static_cast<std::size_t>(__builtin_popcount((s ^ goal_value) & goal_mask));
  };

  if (unsatisfied(start) == 0) return {PlanStatus::already_satisfied, {}, 0};

  // Goal-count is consistent here (each action flips one bit), so the first
  // expansion of a state is optimal and closed states never reopen.
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::unordered_map<std::uint32_t, bool> closed;
  open.push({unsatisfied(start), {}, start});
  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (!closed.emplace(node.state, true).second) continue;
    if (unsatisfied(node.state) == 0) {
      Plan plan{PlanStatus::solved, {}, node.path.size()};
      for (auto idx : node.path) plan.actions.push_back(domain.actions[actions[idx].source].name);
      return plan;
    }
    const std::size_t g = node.path.size() + 1;
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const auto& act = actions[a];
      if ((node.state & act.need_true) != act.need_true || (node.state & act.need_false) != 0) continue;
      const std::uint32_t next = act.sets ? (node.state | act.bit) : (node.state & ~act.bit);
      if (next == node.state || closed.count(next)) continue;
      Node child{g + unsatisfied(next), node.path, next};
      child.path.push_back(static_cast<std::uint16_t>(a));
      open.push(std::move(child));
    }
  }
  return {PlanStatus::infeasible, {}, 0};
}

Simulation simulate(const StripsDomain& domain, const TraitState& initial, std::span<const std::string> actions) {
  Simulation sim;
  sim.final_state = initial;
  if (initial.size() != domain.predicates.size()) {
    sim.error = "initial state does not match the domain";
    return sim;
  }
  for (std::size_t step = 0; step < actions.size(); ++step) {
    const StripsAction* act = domain.find_action(actions[step]);
    if (!act) {
      sim.error = "step " + std::to_string(step) + ": unknown action '" + actions[step] + "'";
      return sim;
    }
    for (const auto& l : act->preconditions) {
      const auto i = domain.predicate_index(l.trait);
      if (!i || sim.final_state[*i] != l.value) {
        sim.error = "step " + std::to_string(step) + ": precondition " + (l.value ? "" : "not ") + l.trait +
                    " of '" + act->name + "' does not hold";
        return sim;
      }
    }
    for (const auto& l : act->effects) sim.final_state[*domain.predicate_index(l.trait)] = l.value;
  }
  sim.valid = true;
  return sim;
}

Plan validate_plan(const PlanProblem& problem, const StripsDomain& domain, std::vector<std::string> actions) {
  const Simulation sim = simulate(domain, problem.initial, actions);
  if (!sim.valid) throw ValidationError("imported plan is not executable: " + sim.error);
  if (!satisfies(sim.final_state, problem.goal)) throw ValidationError("imported plan does not reach the goal");
  if (actions.empty()) return {PlanStatus::already_satisfied, {}, 0};
  const std::size_t cost = actions.size();
  return {PlanStatus::solved, std::move(actions), cost};
}

std::string plan_json(const Plan& plan, const std::string* prompt) {
  detail::json j;
  j["status"] = to_string(plan.status);
  j["actions"] = plan.actions;
  j["cost"] = plan.cost;
  if (prompt) j["prompt"] = *prompt;
  return j.dump(2) + "\n";
}

Plan parse_plan_json(const std::string& text) {
  const detail::json j = detail::parse_json(text, "plan");
  if (!j.is_object() || !j.contains("status") || !j.contains("actions")) {
    throw ValidationError("plan JSON needs status and actions");
  }
  Plan plan;
  const std::string status = j["status"].get<std::string>();
  if (status == "solved") {
    plan.status = PlanStatus::solved;
  } else if (status == "already_satisfied") {
    plan.status = PlanStatus::already_satisfied;
  } else if (status == "infeasible") {
    plan.status = PlanStatus::infeasible;
  } else {
    throw ValidationError("unknown plan status '" + status + "'");
  }
  plan.actions = j["actions"].get<std::vector<std::string>>();
  plan.cost = plan.actions.size();
  if (j.contains("cost") && j["cost"].get<std::size_t>() != plan.cost) {
    throw ValidationError("plan cost does not match its action count");
  }
  return plan;
}

}  // namespace realism
