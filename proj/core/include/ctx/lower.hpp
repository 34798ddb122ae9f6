#pragma once
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctx/ast.hpp"
#include "ctx/loader.hpp"
#include "ctx/typed.hpp"

namespace ctx {

struct Ir;
using IrP = std::shared_ptr<const Ir>;

// HOAS closure target. Closed: every GetLocal resolves to an enclosing Lam or
// Closure parameter, a declared local, or a field via GetField(this).
// Context-sensitive operands always lower to Lam; no NameAst survives here.
struct Ir {
  enum class K {
    Lam,        // one env parameter; body evaluated only on App
    App,        // apply a Lam/Closure value to one argument
    CallOp,     // user operator; kids = receiver? + operands
    CallMethod, // user method; kids = receiver? + args + hidden req frames
    New,
    GetField,   // kids[0].field
    SetField,   // kids[0].field = kids[1]
    GetLocal,
    SetLocal,
    Lit,
    Seq,
    If,
    While,
    ForEach,    // kids[0] list, kids[1] body; var in s
    Return,     // kids empty for bare return
    TryFinally,
    Closure,    // named params
    Builtin,    // free or method built-in; name in s
  };
  K k = K::Lit;
  std::string s;  // param/local/field/builtin/class name
  const OpDecl* op = nullptr;
  const MethodDecl* method = nullptr;
  const ClassDecl* cls = nullptr;  // New: null for built-in classes in s
  int ctor_idx = -1;
  Prim lit_kind = Prim::Unit;
  long long lit_int = 0;
  bool lit_bool = false;
  std::string lit_str;
  bool declare = false;  // SetLocal introduces the binding
  bool has_recv = false; // CallOp/CallMethod/Builtin: kids[0] is the receiver
  std::vector<std::string> names;  // Closure parameter names
  std::vector<IrP> kids;
  std::string where;  // provenance "origin:offset"
};

std::string dump_ir(const IrP& ir);

struct LoweredClass {
  const ClassDecl* cls = nullptr;
  std::vector<IrP> op_bodies;
  std::vector<IrP> method_bodies;
  std::vector<IrP> ctor_bodies;
};

struct LoweredProgram {
  std::map<const ClassDecl*, LoweredClass> classes;
  IrP main_ir;  // null when no main block
};

LoweredProgram lower_program(const TypedProgram& typed,
                             const LinkedProgram& linked);

// Exposed for tests: lowers one expression with the given assumption frame
// environment names (innermost last).
IrP lower_expr(const TE& e, const std::vector<std::pair<Ty, std::string>>&
                                frame_envs,
               const std::string& origin);

std::string dump_program(const LoweredProgram& lp);

}  // namespace ctx
