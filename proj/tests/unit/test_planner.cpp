#include <gtest/gtest.h>

#include <algorithm>

#include <map>

#include "oracles.hpp"
#include "realism/error.hpp"
#include "realism/planner.hpp"

using namespace realism;

namespace {

TraitState state_of(const KnowledgeGraph& g, const std::map<std::string, bool>& on) {
  TraitState s(g.size(), false);
  for (const auto& [id, v] : on) s[g.index_of(id)] = v;
  return s;
}

PartialState goal_of(const KnowledgeGraph& g, const std::map<std::string, bool>& want) {
  PartialState s(g.size());
  for (const auto& [id, v] : want) s[g.index_of(id)] = v;
  return s;
}

std::uint32_t bits(const TraitState& s) {
  std::uint32_t b = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) b |= 1u << i;
  return b;
}

}  // namespace

TEST(Domain, ShadowsNeedNonUniformLighting) {
  const auto g = default_ontology();
  const auto d = compile_domain(g);
  const auto* a = d.find_action("enable-shadows.present");
  ASSERT_NE(a, nullptr);
  EXPECT_NE(std::find(a->preconditions.begin(), a->preconditions.end(), Literal{"lighting.uniform", false}),
            a->preconditions.end());
  EXPECT_EQ(d.actions.size(), 2 * g.size());
  EXPECT_EQ(d.predicates.size(), 14u);
}

TEST(Domain, IsolatedTraitHasOnlyOwnPrecondition) {
  KnowledgeGraph g({{"solo", "Solo", TraitCategory::material, "add", "remove"}}, {});
  const auto d = compile_domain(g);
  ASSERT_EQ(d.actions.size(), 2u);
  EXPECT_EQ(d.actions[0].preconditions, (std::vector<Literal>{{"solo", false}}));
  EXPECT_EQ(d.actions[1].preconditions, (std::vector<Literal>{{"solo", true}}));
}

TEST(Solve, AlreadySatisfied) {
  const auto g = default_ontology();
  const auto d = compile_domain(g);
  PlanProblem p{"p", state_of(g, {{"optical.blur", true}}), goal_of(g, {{"optical.blur", true}})};
  const auto plan = solve(p, d);
  EXPECT_EQ(plan.status, PlanStatus::already_satisfied);
  EXPECT_TRUE(plan.actions.empty());
}

TEST(Solve, ShadowsUnderUniformLightingTakesTwoSteps) {
  const auto g = default_ontology();
  const auto d = compile_domain(g);
  PlanProblem p{"p", state_of(g, {{"lighting.uniform", true}}), goal_of(g, {{"shadows.present", true}})};
  const auto plan = solve(p, d);
  EXPECT_EQ(plan.status, PlanStatus::solved);
  EXPECT_EQ(plan.actions, (std::vector<std::string>{"disable-lighting.uniform", "enable-shadows.present"}));
  EXPECT_EQ(plan.cost, 2u);
  oracle::BfsPlanner bfs(g);
  const auto mask = 1u << g.index_of("shadows.present");
  EXPECT_EQ(bfs.cost(bits(p.initial), mask, mask), std::optional<std::size_t>(2));
}

TEST(Solve, ContradictoryGoalIsInfeasible) {
  const auto g = default_ontology();
  const auto d = compile_domain(g);
  PlanProblem p{"p", state_of(g, {}), goal_of(g, {{"lighting.uniform", true}, {"shadows.present", true}})};
  EXPECT_EQ(solve(p, d).status, PlanStatus::infeasible);
}

TEST(Solve, MatchesBfsOnRandomOntologies) {
  Rng rng(2718);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.index(10);
    const auto g = parse_ontology(oracle::random_ontology_json(rng, n, n + rng.index(n)));
    const auto d = compile_domain(g);
    oracle::BfsPlanner bfs(g);
    for (int q = 0; q < 25; ++q) {
      PlanProblem p;
      p.initial.resize(n);
      p.goal.resize(n);
      std::uint32_t mask = 0, value = 0;
      for (std::size_t i = 0; i < n; ++i) {
        p.initial[i] = rng.uniform() < 0.5;
        if (rng.uniform() < 0.4) {
          p.goal[i] = rng.uniform() < 0.5;
          mask |= 1u << i;
          if (*p.goal[i]) value |= 1u << i;
        }
      }
      const auto plan = solve(p, d);
      const auto want = bfs.cost(bits(p.initial), mask, value);
      ASSERT_EQ(plan.status == PlanStatus::infeasible, !want.has_value()) << "trial " << trial;
      if (!want) continue;
      EXPECT_EQ(plan.cost, *want);
      EXPECT_EQ(plan.actions.size(), plan.cost);
      const auto end = bfs.simulate(bits(p.initial), plan.actions);
      ASSERT_TRUE(end.has_value());
      EXPECT_EQ(*end & mask, value);
    }
  }
}

TEST(Solve, EqualCostPlansPickSmallestNames) {
  KnowledgeGraph g({{"b", "B", TraitCategory::material, "add b", "remove b"},
                    {"a", "A", TraitCategory::material, "add a", "remove a"}},
                   {});
  const auto d = compile_domain(g);
  PlanProblem p{"p", {false, false}, {true, true}};
  EXPECT_EQ(solve(p, d).actions, (std::vector<std::string>{"enable-a", "enable-b"}));
}

TEST(Solve, CapacityLimit) {
  std::vector<Trait> traits;
  for (int i = 0; i < 25; ++i) traits.push_back({"t" + std::to_string(i), "T", TraitCategory::material, "a", "r"});
  KnowledgeGraph g(traits, {});
  PlanProblem p{"p", TraitState(25, false), PartialState(25, true)};
  EXPECT_THROW(solve(p, compile_domain(g)), CapacityError);
}

TEST(Solve, ShapeMismatchThrows) {
  const auto d = compile_domain(default_ontology());
  EXPECT_THROW(solve(PlanProblem{"p", TraitState(3), PartialState(3, true)}, d), ShapeError);
}

TEST(Diff, IdenticalVectorsGiveEmptyGoal) {
  const std::vector<double> p{0.1, 0.6, 0.9};
  const auto problem = diff_states(p, p, 0.5);
  EXPECT_EQ(problem.constrained(), 0u);
  KnowledgeGraph g({{"a", "A", TraitCategory::material, "x", "y"},
                    {"b", "B", TraitCategory::material, "x", "y"},
                    {"c", "C", TraitCategory::material, "x", "y"}},
                   {});
  EXPECT_EQ(solve(problem, compile_domain(g)).status, PlanStatus::already_satisfied);
}

TEST(Diff, OneDifferingTrait) {
  const auto problem = diff_states(std::vector<double>{0.1, 0.6, 0.9}, std::vector<double>{0.1, 0.2, 0.9}, 0.5);
  EXPECT_EQ(problem.constrained(), 1u);
  EXPECT_EQ(problem.goal[1], false);
  EXPECT_EQ(problem.initial, (TraitState{false, true, true}));
  EXPECT_EQ(diff_states(std::vector<double>{0.1, 0.6, 0.9}, std::vector<double>{0.1, 0.2, 0.9}, 0.5, true).constrained(),
            3u);
}

TEST(Diff, ThresholdSweepChangesOnlyAtFlips) {
  const std::vector<double> ps{0.15, 0.35, 0.55, 0.8}, pt{0.45, 0.25, 0.7, 0.05};
  std::vector<double> values(ps);
  values.insert(values.end(), pt.begin(), pt.end());
  PlanProblem prev = diff_states(ps, pt, 0.0);
  for (int step = 1; step <= 100; ++step) {
    const double lo = (step - 1) / 100.0, hi = step / 100.0;
    const PlanProblem cur = diff_states(ps, pt, hi);
    bool flip = false;
    for (double v : values) flip |= v >= lo && v < hi;
    if (!flip) EXPECT_EQ(cur.goal, prev.goal) << hi;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const bool s = ps[i] >= hi, t = pt[i] >= hi;
      EXPECT_EQ(cur.goal[i].has_value(), s != t);
      if (cur.goal[i]) EXPECT_EQ(*cur.goal[i], t);
    }
    prev = cur;
  }
}

TEST(Diff, LengthMismatch) {
  EXPECT_THROW(diff_states(std::vector<double>{0.1}, std::vector<double>{0.1, 0.2}, 0.5), ShapeError);
}

TEST(ValidatePlan, AcceptsAndRejects) {
  const auto g = default_ontology();
  const auto d = compile_domain(g);
  PlanProblem p{"p", state_of(g, {{"lighting.uniform", true}}), goal_of(g, {{"shadows.present", true}})};
  const auto ok = validate_plan(p, d, {"disable-lighting.uniform", "enable-shadows.present"});
  EXPECT_EQ(ok.status, PlanStatus::solved);
  EXPECT_EQ(ok.cost, 2u);
  EXPECT_THROW(validate_plan(p, d, {"enable-shadows.present"}), ValidationError);
  EXPECT_THROW(validate_plan(p, d, {"disable-lighting.uniform"}), ValidationError);
  EXPECT_THROW(validate_plan(p, d, {"enable-nothing"}), ValidationError);
}

TEST(PlanJson, RoundTrip) {
  const Plan plan{PlanStatus::solved, {"disable-lighting.uniform", "enable-shadows.present"}, 2};
  EXPECT_EQ(parse_plan_json(plan_json(plan)), plan);
  const std::string prompt = "Do it.";
  EXPECT_NE(plan_json(plan, &prompt).find("\"prompt\": \"Do it.\""), std::string::npos);
  EXPECT_THROW(parse_plan_json("{\"status\": \"solved\", \"actions\": [\"x\"], \"cost\": 4}"), ValidationError);
}
