#pragma once
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctx/diag.hpp"

namespace ctx {

struct ClassDecl;
struct OpDecl;
struct TypeT;
struct NameAst;

using Ty = std::shared_ptr<const TypeT>;
using NameP = std::shared_ptr<const NameAst>;

enum class Prim { Int, Bool, Str, Void, Unit, Null };

// Types are immutable and freely shared. Var nodes are unification variables
// owned by one parse session; Param nodes are rigid type parameters in scope
// inside a member body; Name nodes are ground NAME-kind type arguments.
struct TypeT {
  enum class K { Prim, Cls, Stile, Var, Param, Name };
  K k = K::Prim;
  Prim prim = Prim::Void;
  std::string cls;       // Cls: class name as written (unqualified)
  std::vector<Ty> args;  // Cls type arguments
  Ty lhs, rhs;           // Stile: lhs |- rhs; lhs is always a Cls
  int var = -1;          // Var
  bool name_kind = false;  // Var/Param of NAME kind
  std::string pname;       // Param
  NameP name;              // Name
};

Ty t_prim(Prim p);
Ty t_int();
Ty t_bool();
Ty t_str();
Ty t_void();
Ty t_unit();
Ty t_cls(std::string name, std::vector<Ty> args = {});
Ty t_stile(Ty lhs, Ty rhs);
Ty t_var(int id, bool name_kind = false);
Ty t_param(std::string name, bool name_kind = false);
Ty t_name(NameP n);

bool type_equal(const Ty& a, const Ty& b);
std::string render_type(const Ty& t);

// A parsed generic-name operand: the application tree of literal operators.
// Identity is structural; the matched source text is excluded from equality.
struct NameAst {
  const OpDecl* op = nullptr;
  std::vector<NameP> kids;
  std::string text;
};

bool name_ast_equal(const NameP& a, const NameP& b);

// Deterministic injective mapping from (tree, scope) to a valid identifier.
// Equal trees in the same scope collide by design; nothing else does.
std::string erase_name(const NameP& a, int scope);

struct TypeParam {
  std::string name;
  bool is_name = false;
  std::string name_type;  // NAME kind: the user type parsed for occurrences
  std::string bound;      // TYPE kind: optional built-in bound (e.g. Closeable)
};

enum class Rep { One, Star, Plus };

struct SyntaxElem {
  enum class K { Part, Operand, NameOp };
  K k = K::Part;
  std::string text;   // Part: literal token; NameOp: NAME parameter name
  std::string prio;   // Operand: priority annotation as written, may be empty
  Rep rep = Rep::One; // Operand only; at most one Star/Plus per operator
};

struct Param {
  std::string name;
  Ty type;
  bool variadic = false;
};

// ---- kernel statements -----------------------------------------------------
// The loader fixes statement structure; expression positions stay raw spans
// until the parse engine resolves them under an expected type.

struct RawSpan {
  enum class Ctx { None, Init, Cond, Arg, Return, Operand, Stmt };
  int begin = 0;
  int end = 0;
  Ctx ctx = Ctx::None;
  bool empty() const { return begin >= end; }
};

struct KBlock;
using KBlockP = std::unique_ptr<KBlock>;

struct KStmt {
  enum class K { Local, Expr, If, While, ForEach, Return, TryFinally, Block };
  K k = K::Expr;
  int off = 0;
  Ty decl_type;                     // Local, ForEach element type
  std::string name;                 // Local, ForEach variable
  RawSpan init;                     // Local initializer (required)
  RawSpan span;                     // Expr whole span; Return value
  std::vector<std::string> target;  // Expr: dotted assignment target hint
  RawSpan rhs;                      // Expr: assignment right-hand side hint
  RawSpan cond;                     // If, While
  RawSpan iter;                     // ForEach
  bool has_value = false;           // Return
  KBlockP body;                     // If-then, While, ForEach, Try, Block
  KBlockP alt;                      // If-else, Try finalizer
};

struct KBlock {
  std::vector<KStmt> stmts;
  int begin = 0, end = 0;
};

// ---- declarations ----------------------------------------------------------

struct OpDecl {
  bool is_static = false;
  bool is_literal = false;  // literal implies static
  std::string prio;         // operator priority annotation, may be empty
  std::vector<TypeParam> tparams;
  Ty ret;
  std::vector<SyntaxElem> syntax;
  std::vector<Param> params;
  std::vector<Ty> requires_classes;
  KBlockP body;
  const ClassDecl* owner = nullptr;
  int decl_idx = 0;
  int off = 0;
};

struct MethodDecl {
  bool is_static = false;
  std::string name;
  std::vector<TypeParam> tparams;
  Ty ret;
  std::vector<Param> params;
  std::vector<Ty> requires_classes;
  KBlockP body;
  const ClassDecl* owner = nullptr;
  int decl_idx = 0;
  int off = 0;
};

struct CtorDecl {
  std::vector<Param> params;
  KBlockP body;
  int off = 0;
};

struct FieldDecl {
  std::string name;
  Ty type;
  bool is_private = false;
  int off = 0;
};

struct PriorityDecl {
  std::vector<std::string> names;  // short names, unique within the class
  // lo < hi pairs; names as written (short or Owner.qualified)
  std::vector<std::pair<std::string, std::string>> constraints;
};

struct ClassDecl {
  std::string name;
  bool is_dsl = false;
  std::vector<TypeParam> tparams;
  std::optional<PriorityDecl> priorities;
  std::vector<OpDecl> ops;
  std::vector<MethodDecl> methods;
  std::vector<CtorDecl> ctors;
  std::vector<FieldDecl> fields;
  int off = 0;

  const TypeParam* find_tparam(const std::string& n) const;
  const FieldDecl* find_field(const std::string& n) const;
};

struct ImportDecl {
  std::string dsl;
  // import-site constraints; both sides must be qualified priority names
  std::vector<std::pair<std::string, std::string>> constraints;
  int off = 0;
};

struct Program {
  std::string origin;
  std::shared_ptr<const std::string> src;
  std::vector<ImportDecl> imports;
  std::vector<std::unique_ptr<ClassDecl>> classes;
  KBlockP main_block;  // entry files only
  int main_off = 0;

  std::string span_text(const RawSpan& s) const;
};

// Human-readable operator signature; round-trips through the loader grammar.
std::string render_operator(const OpDecl& op);

}  // namespace ctx
