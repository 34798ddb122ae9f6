#include "ctx/priority.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace ctx {

namespace {

std::string qualify(const std::string& owner, const std::string& name) {
  if (name.find('.') != std::string::npos) return name;
  return owner + "." + name;
}

std::string short_name(const std::string& q) {
  auto dot = q.find('.');
  return dot == std::string::npos ? q : q.substr(dot + 1);
}

}  // namespace

int PriorityOrder::rank_of(const std::string& owner,
                           const std::string& prio) const {
  if (prio.empty()) return kBottom;
  auto it = rank.find(qualify(owner, prio));
  return it == rank.end() ? kBottom : it->second;
}

std::string CycleError::render() const {
  std::string out = "invalid operator priorities: ";
  for (size_t i = 0; i < cycle.size(); i++) {
    if (i) out += " < ";
    out += short_name(cycle[i]);
  }
  return out;
}

MergeResult merge_priorities(
    const std::vector<const ClassDecl*>& scope_classes,
    const std::vector<std::pair<std::string, std::string>>& import_constraints,
    const std::string& origin) {
  MergeResult r;

  // Node registration order = scope order; it seeds the deterministic
  // tie break in the topological sort.
  std::vector<std::string> nodes;
  std::map<std::string, int> index;
  auto add_node = [&](const std::string& q) {
    if (index.count(q)) return;
    index[q] = (int)nodes.size();
    nodes.push_back(q);
  };
  for (const ClassDecl* c : scope_classes) {
    if (!c->priorities) continue;
    for (const auto& n : c->priorities->names) add_node(qualify(c->name, n));
  }

  std::vector<std::pair<std::string, std::string>> edges;  // lo < hi
  auto add_edge = [&](const std::string& owner, const std::string& lo,
                      const std::string& hi, int off) {
    std::string qlo = qualify(owner, lo), qhi = qualify(owner, hi);
    bool ok = true;
    if (!index.count(qlo)) {
      r.diags.error(origin, off, "unknown priority '" + qlo + "'");
      ok = false;
    }
    if (!index.count(qhi)) {
      r.diags.error(origin, off, "unknown priority '" + qhi + "'");
      ok = false;
    }
    if (ok) edges.emplace_back(qlo, qhi);
  };
  for (const ClassDecl* c : scope_classes) {
    if (!c->priorities) continue;
    for (const auto& [lo, hi] : c->priorities->constraints)
      add_edge(c->name, lo, hi, c->off);
  }
  for (const auto& [lo, hi] : import_constraints) add_edge("", lo, hi, 0);
  if (r.diags.has_error()) return r;

  // Kahn's algorithm, smallest registration index first. Emitting low
  // priorities first assigns ranks 1, 2, ... upward from BOTTOM.
  std::vector<std::vector<int>> succ(nodes.size());
  std::vector<int> indeg(nodes.size(), 0);
  std::set<std::pair<int, int>> seen_edges;
  for (const auto& [lo, hi] : edges) {
    int a = index[lo], b = index[hi];
    if (!seen_edges.insert({a, b}).second) continue;
    succ[a].push_back(b);
    indeg[b]++;
  }

  PriorityOrder order;
  std::set<int> ready;
  for (int i = 0; i < (int)nodes.size(); i++)
    if (indeg[i] == 0) ready.insert(i);
  int next_rank = PriorityOrder::kBottom + 1;
  int emitted = 0;
  while (!ready.empty()) {
    int n = *ready.begin();
    ready.erase(ready.begin());
    order.rank[nodes[n]] = next_rank++;
    emitted++;
    for (int m : succ[n])
      if (--indeg[m] == 0) ready.insert(m);
  }

  if (emitted < (int)nodes.size()) {
    // Recover one concrete cycle from the leftover subgraph by DFS.
    std::vector<int> state(nodes.size(), 0);  // 0 new, 1 on stack, 2 done
    std::vector<int> stack;
    std::vector<std::string> cyc;
    auto dfs = [&](auto&& self, int n) -> bool {
      state[n] = 1;
      stack.push_back(n);
      for (int m : succ[n]) {
        if (state[m] == 1) {
          auto it = std::find(stack.begin(), stack.end(), m);
          for (; it != stack.end(); ++it) cyc.push_back(nodes[*it]);
          cyc.push_back(nodes[m]);
          return true;
        }
        if (state[m] == 0 && self(self, m)) return true;
      }
      state[n] = 2;
      stack.pop_back();
      return false;
    };
    for (int i = 0; i < (int)nodes.size() && cyc.empty(); i++)
      if (state[i] == 0 && !order.rank.count(nodes[i])) dfs(dfs, i);
    r.cycle = CycleError{std::move(cyc)};
    r.diags.error(origin, 0, r.cycle->render());
    return r;
  }

  r.order = std::move(order);
  return r;
}

bool operand_admits(const PriorityOrder& order, const std::string& slot_owner,
                    const std::string& op_prio, const std::string& annotation,
                    const std::string& cand_owner,
                    const std::string& cand_prio) {
  int cand = order.rank_of(cand_owner, cand_prio);
  return cand >= slot_min_rank(order, slot_owner, op_prio, annotation);
}

int slot_min_rank(const PriorityOrder& order, const std::string& slot_owner,
                  const std::string& op_prio, const std::string& annotation) {
  if (!annotation.empty()) return order.rank_of(slot_owner, annotation);
  if (!op_prio.empty()) return order.rank_of(slot_owner, op_prio) + 1;
  return PriorityOrder::kBottom;
}

}  // namespace ctx
