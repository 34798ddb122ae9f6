#pragma once
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctx/checker.hpp"
#include "ctx/loader.hpp"
#include "ctx/lower.hpp"
#include "ctx/parser.hpp"
#include "ctx/priority.hpp"
#include "ctx/runtime.hpp"

namespace ctx {

struct CompileResult {
  bool ok = false;
  DiagList diags;
  std::shared_ptr<LinkedProgram> linked;
  std::map<const Program*, PriorityOrder> orders;
  TypedProgram typed;
  LoweredProgram lowered;
  ParseStats entry_stats;
};

// read entry -> resolve imports -> merge priorities per unit -> check -> lower
CompileResult compile_source(const std::string& text, const std::string& origin,
                             const std::vector<std::string>& search_paths,
                             const FileLoader& loader = fs_loader(),
                             std::function<void(const std::string&)> trace =
                                 nullptr);

CompileResult compile_file(const std::string& path,
                           const std::vector<std::string>& search_paths,
                           std::function<void(const std::string&)> trace =
                               nullptr);

}  // namespace ctx
