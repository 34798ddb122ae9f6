#pragma once
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctx/ast.hpp"

namespace ctx {

struct TExpr;
struct TBlock;
using TE = std::shared_ptr<const TExpr>;
using TBlockP = std::shared_ptr<const TBlock>;

// Type-checked expression. Every node carries its result type; types inside a
// node are advisory after parsing (evaluation never consults them).
struct TExpr {
  enum class K {
    OpApp,      // user operator application
    Context,    // context-sensitive operand: one assumption frame over body
    Block,      // statement block in expression position (expected Void)
    Lit,        // Int/Bool/Str/Unit literal
    Null,
    Local,      // local or parameter reference
    SelfField,  // field of the enclosing class instance
    FieldRead,  // base.field where base is an identifier chain
    New,
    Call,      // recv.m(args): user method, built-in method, or apply
    BareCall,  // f(args): free built-in or static method with requires
    Closure,   // fun (T x) : R { ... }
    NameLit,   // parsed name occurrence; never evaluated
  };
  K k = K::Lit;
  Ty type;
  int off = 0;

  const OpDecl* op = nullptr;          // OpApp
  Ty frame;                            // OpApp receiver frame; Context frame
  std::vector<TE> args;                // OpApp operands / call args
  std::map<std::string, NameP> names;  // OpApp: NAME tparam bindings

  TE body;       // Context
  TBlockP block; // Block, Closure body

  Prim lit_kind = Prim::Unit;  // Lit
  long long lit_int = 0;
  bool lit_bool = false;
  std::string lit_str;

  std::string name;  // Local/SelfField/FieldRead field/Call/BareCall/New class
  TE base;           // FieldRead, Call receiver

  std::vector<Ty> targs;                 // New
  const class ClassDecl* cls = nullptr;  // New (null for built-in classes)
  int ctor_idx = -1;                     // New: -1 default or built-in

  const MethodDecl* method = nullptr;  // Call/BareCall user target
  bool is_apply = false;               // Call on turnstile/Function value

  std::string cl_param;  // Closure
  Ty cl_param_type, cl_ret;

  NameP name_ast;  // NameLit
};

struct TStmt {
  KStmt::K k = KStmt::K::Expr;
  int off = 0;
  std::string name;  // Local/ForEach var; assign target leaf field
  Ty decl_type;
  TE a;  // Local init / Expr value / If-While cond / Return value / assign rhs
  TE base;  // field assignment base (null = this)
  bool assign_local = false;
  bool assign_field = false;
  TE iter;  // ForEach
  TBlockP body, alt;
  bool has_value = false;  // Return
};

struct TBlock {
  std::vector<TStmt> stmts;
  int off = 0;
};

struct TypedClass {
  const ClassDecl* cls = nullptr;
  std::vector<TBlockP> op_bodies;      // aligned with ClassDecl::ops
  std::vector<TBlockP> method_bodies;  // aligned with methods
  std::vector<TBlockP> ctor_bodies;    // aligned with ctors
};

struct TypedProgram {
  std::map<const ClassDecl*, TypedClass> classes;
  TBlockP main_body;  // null when the entry file has no main block
};

}  // namespace ctx
