#include "ctx/driver.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace ctx {

CompileResult compile_source(const std::string& text, const std::string& origin,
                             const std::vector<std::string>& search_paths,
                             const FileLoader& loader,
                             std::function<void(const std::string&)> trace) {
  CompileResult r;
  ReadResult rr = read_program(text, origin);
  r.diags.append(rr.diags);
  if (!rr.program) return r;
  LinkResult lr = resolve_imports(rr.program, search_paths, loader);
  r.diags.append(lr.diags);
  if (!lr.linked) return r;
  r.linked = lr.linked;

  for (const auto& unitp : r.linked->units) {
    const Program* unit = unitp.get();
    std::vector<std::pair<std::string, std::string>> cons;
    for (const ImportDecl& im : unit->imports)
      for (const auto& c : im.constraints) cons.push_back(c);
    MergeResult mr =
        merge_priorities(r.linked->scope_classes(*unit), cons, unit->origin);
    r.diags.append(mr.diags);
    if (mr.cycle) {
      r.diags.error(unit->origin, 0, mr.cycle->render());
      return r;
    }
    if (!mr.order) return r;
    r.orders.emplace(unit, std::move(*mr.order));
  }

  CheckResult cr = check_program(*r.linked, r.orders, std::move(trace));
  r.diags.append(cr.diags);
  for (const auto& [unit, st] : cr.stats)
    if (unit == r.linked->entry.get()) r.entry_stats = st;
  if (!cr.ok) return r;
  r.typed = std::move(cr.typed);
  r.lowered = lower_program(r.typed, *r.linked);
  r.ok = true;
  return r;
}

CompileResult compile_file(const std::string& path,
                           const std::vector<std::string>& search_paths,
                           std::function<void(const std::string&)> trace) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    CompileResult r;
    r.diags.error(path, 0, "cannot read file");
    return r;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  std::vector<std::string> paths;
  paths.push_back(std::filesystem::path(path).parent_path().string());
  for (const std::string& p : search_paths) paths.push_back(p);
  return compile_source(ss.str(), path, paths, fs_loader(), std::move(trace));
}

}  // namespace ctx
