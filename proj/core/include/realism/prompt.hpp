#pragma once

#include <string>
#include <vector>

#include "realism/ontology.hpp"
#include "realism/planner.hpp"

namespace realism {

struct PromptSpec {
  std::vector<std::string> clauses;  // one per plan action, plan order
  std::string joined;

  bool operator==(const PromptSpec&) const = default;
};

struct PromptStyle {
  std::string joiner = ", then ";
  std::string no_op = "Keep the image unchanged.";
};

// Templates may reference {trait} (display name) and {id}; any other
// placeholder is a ValidationError, as is an action on an unknown trait.
PromptSpec compile_prompt(const Plan& plan, const KnowledgeGraph& graph, const PromptStyle& style = {});

}  // namespace realism
