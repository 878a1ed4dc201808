#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. Nothing here calls into the code it is checking.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "realism/ontology.hpp"
#include "realism/rng.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

Grid naive_matmul(const Grid& a, const Grid& b);

// Central differences with step h on a scalar function of a flat vector.
std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5);

// Planner oracle built straight from the relation list: enabling t needs t
// off, every opposing trait off and every prerequisite supporter on.
class BfsPlanner {
 public:
  explicit BfsPlanner(const realism::KnowledgeGraph& graph);

  // Minimal number of single-trait toggles reaching the goal, or nullopt.
  std::optional<std::size_t> cost(std::uint32_t initial, std::uint32_t goal_mask, std::uint32_t goal_value) const;

  // Executes action names ("enable-<id>"/"disable-<id>"); nullopt on any
  // unknown action or violated precondition.
  std::optional<std::uint32_t> simulate(std::uint32_t initial, const std::vector<std::string>& actions) const;

  bool violates_opposition(std::uint32_t state) const;

  std::size_t size() const { return ids_.size(); }

 private:
  bool can_enable(std::uint32_t state, std::size_t t) const;

  std::vector<std::string> ids_;
  std::vector<std::uint32_t> blockers_;
  std::vector<std::uint32_t> prerequisites_;
};

double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

double scalar_trait_dist(const std::vector<double>& a, const std::vector<double>& b);

// Per-window SSIM on single-channel planes (row-major, w × h) with an explicit
// 2-D Gaussian window and two-pass moments.
double per_window_ssim(const std::vector<double>& x, const std::vector<double>& y, std::size_t w, std::size_t h,
                       std::size_t win = 11, double sigma = 1.5, double c1 = 1e-4, double c2 = 9e-4);

// Random valid ontology: `n` traits with ids drawn from [a-z][a-z0-9_.]*,
// up to `relations` relations on distinct unordered pairs, random kinds,
// weights and prerequisite flags.
std::string random_ontology_json(realism::Rng& rng, std::size_t n, std::size_t relations);

}  // namespace oracle
