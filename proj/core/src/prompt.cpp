#include "realism/prompt.hpp"

#include <cctype>

#include "realism/error.hpp"

namespace realism {

namespace {

std::string expand(const std::string& tmpl, const Trait& trait) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] != '{') {
      out += tmpl[i];
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string::npos) throw ValidationError("unterminated placeholder in template for " + trait.id);
    const std::string key = tmpl.substr(i + 1, close - i - 1);
    if (key == "trait") {
      out += trait.display_name;
    } else if (key == "id") {
      out += trait.id;
    } else {
      throw ValidationError("unknown placeholder {" + key + "} in template for " + trait.id);
    }
    i = close;
  }
  return out;
}

// "enable-x" -> (enable, "x")
std::pair<PlanOp, std::string> split_action(const std::string& name) {
  if (name.rfind("enable-", 0) == 0) return {PlanOp::enable, name.substr(7)};
  if (name.rfind("disable-", 0) == 0) return {PlanOp::disable, name.substr(8)};
  throw ValidationError("plan action '" + name + "' is neither enable-* nor disable-*");
}

}  // namespace

PromptSpec compile_prompt(const Plan& plan, const KnowledgeGraph& graph, const PromptStyle& style) {
  PromptSpec spec;
  if (plan.status == PlanStatus::infeasible) throw ValidationError("cannot compile a prompt for an infeasible plan");
  if (plan.actions.empty()) {
    spec.joined = style.no_op;
    return spec;
  }
  for (const auto& name : plan.actions) {
    const auto [op, id] = split_action(name);
    const auto node = graph.find(id);
    if (!node) throw ValidationError("plan action '" + name + "' references unknown trait '" + id + "'");
    const Trait& t = graph.trait(*node);
    const std::string& tmpl = op == PlanOp::enable ? t.enable_instruction : t.disable_instruction;
    if (tmpl.empty()) throw ValidationError("trait " + id + " has an empty " + to_string(op) + " template");
    spec.clauses.push_back(expand(tmpl, t));
  }
  for (std::size_t i = 0; i < spec.clauses.size(); ++i) {
    if (i) spec.joined += style.joiner;
    spec.joined += spec.clauses[i];
  }
  spec.joined[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(spec.joined[0])));
  if (spec.joined.back() != '.') spec.joined += '.';
  return spec;
}

}  // namespace realism
