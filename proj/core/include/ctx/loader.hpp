#pragma once
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctx/ast.hpp"
#include "ctx/diag.hpp"

namespace ctx {

struct ReadResult {
  std::shared_ptr<Program> program;  // null when diags has errors
  DiagList diags;
};

// Fixed declaration grammar: imports, dsl/class declarations, priorities,
// operators, methods, constructors, fields, main, kernel statements.
// Expression positions become RawSpans for the parse engine.
ReadResult read_program(const std::string& text, const std::string& origin);

// Statement-list parser shared with block operands at parse time.
// Parses statements until limit or a '}' at depth 0; on error appends a diag.
bool read_stmts(const std::string& src, const std::string& origin, int pos,
                int limit, KBlock& out, DiagList& diags);

std::string render_program(const Program& p);

// Structure-only fingerprint used by round-trip tests: declaration shapes and
// span texts, no offsets.
std::string program_digest(const Program& p);

using FileLoader =
    std::function<std::optional<std::string>(const std::string& path)>;

FileLoader fs_loader();

struct LinkedProgram {
  std::shared_ptr<Program> entry;
  // entry first, then imported files in first-load order
  std::vector<std::shared_ptr<Program>> units;

  const ClassDecl* find_class(const std::string& name) const;
  const Program* unit_of(const ClassDecl* c) const;
  std::vector<const ClassDecl*> all_classes() const;
  // Import scope of a unit: directly imported classes in import order
  // (duplicates dropped), then the unit's own classes. Static operators come
  // only from these; there is no transitive operator import.
  std::vector<const ClassDecl*> scope_classes(const Program& unit) const;
};

struct LinkResult {
  std::shared_ptr<LinkedProgram> linked;  // null on error
  DiagList diags;
};

// Loads <Name>.ctx from search paths for every import, transitively, so all
// referenced types resolve. A name resolving to two different files is an
// error; importing the same DSL twice is idempotent.
LinkResult resolve_imports(std::shared_ptr<Program> entry,
                           const std::vector<std::string>& search_paths,
                           const FileLoader& loader = fs_loader());

}  // namespace ctx
