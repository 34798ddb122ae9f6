#pragma once
#include <map>
#include <memory>

#include "ctx/loader.hpp"
#include "ctx/parser.hpp"
#include "ctx/priority.hpp"
#include "ctx/typed.hpp"

namespace ctx {

struct CheckResult {
  TypedProgram typed;
  DiagList diags;
  // per-unit parse statistics; entry unit first
  std::vector<std::pair<const Program*, ParseStats>> stats;
  bool ok = false;
};

// Checks every declaration body at its definition site, then the entry main
// block. Each unit gets its own parse session and priority order.
CheckResult check_program(
    const LinkedProgram& linked,
    const std::map<const Program*, PriorityOrder>& orders,
    std::function<void(const std::string&)> trace = nullptr);

}  // namespace ctx
