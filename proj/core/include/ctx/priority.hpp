#pragma once
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctx/ast.hpp"
#include "ctx/diag.hpp"
#include "ctx/loader.hpp"

namespace ctx {

// Total order over qualified priority names. BOTTOM (the rank of operators
// with no priority) is 0; every named priority ranks above it.
struct PriorityOrder {
  static constexpr int kBottom = 0;
  std::unordered_map<std::string, int> rank;  // "Owner.p" -> rank >= 1

  // Rank of an operator's priority annotation; empty/unknown names sit at
  // BOTTOM. `owner` qualifies short names.
  int rank_of(const std::string& owner, const std::string& prio) const;
};

struct CycleError {
  std::vector<std::string> cycle;  // short names, first repeated last
  std::string render() const;      // "invalid operator priorities: a < b < a"
};

struct MergeResult {
  std::optional<PriorityOrder> order;
  std::optional<CycleError> cycle;
  DiagList diags;  // unresolved priority names
};

// Merges the partial orders of all scope classes plus import-site constraints
// into one total order. Deterministic: topological ties break by class order
// (import order, then declaration order) then by declared name order.
MergeResult merge_priorities(
    const std::vector<const ClassDecl*>& scope_classes,
    const std::vector<std::pair<std::string, std::string>>& import_constraints,
    const std::string& origin);

// Decision table from the operand rule: an annotated slot admits candidates of
// rank >= rank(annotation); an unannotated slot of a prioritized operator
// admits rank > rank(operator); otherwise everything is admitted.
bool operand_admits(const PriorityOrder& order, const std::string& slot_owner,
                    const std::string& op_prio, const std::string& annotation,
                    const std::string& cand_owner,
                    const std::string& cand_prio);

// Same rule as a single lower bound usable as a Goal field.
int slot_min_rank(const PriorityOrder& order, const std::string& slot_owner,
                  const std::string& op_prio, const std::string& annotation);

}  // namespace ctx
