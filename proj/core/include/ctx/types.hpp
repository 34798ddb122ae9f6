#pragma once
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctx/ast.hpp"
#include "ctx/loader.hpp"
#include "ctx/priority.hpp"

namespace ctx {

// Kind-preserving bindings for unification variables. Idempotent under
// resolve: bound terms are resolved through the map on lookup.
struct Subst {
  std::map<int, Ty> m;

  Ty resolve(const Ty& t) const;            // deep
  Ty shallow(const Ty& t) const;            // follow var links only at root
  bool bind(int var, const Ty& t);          // occurs-checked
};

// Unifies expected against actual, extending s. Generics are invariant; the
// only subtyping is Null against nullable ground types. NAME-kind variables
// bind to Name or Param terms of NAME kind.
bool unify(const Ty& expected, const Ty& actual, Subst& s);

// true for types a NullLit may inhabit (classes, Str, rigid params)
bool null_fits(const Ty& t);

bool is_builtin_class(const std::string& name);
int builtin_class_arity(const std::string& name);

struct BuiltinSig {
  std::vector<Ty> params;
  Ty ret;
};

// Built-in instance methods, instantiated against the receiver's arguments.
// Receiver must be a resolved built-in class or primitive.
std::optional<BuiltinSig> builtin_method(const Ty& recv,
                                         const std::string& name, int fresh0);

// Free built-in functions; generic ones use fresh vars starting at fresh0.
std::optional<BuiltinSig> builtin_free(const std::string& name, int fresh0);

// Replaces Param nodes by the mapping; unmapped params stay rigid.
Ty instantiate(const Ty& t, const std::map<std::string, Ty>& env);

struct ScopeOp {
  const OpDecl* op = nullptr;
  int import_idx = 0;  // position of the owning class in scope order
  int decl_idx = 0;
};

// Static operators visible in one source file: imported DSL classes in import
// order, then the file's own classes. Instance operators are derived from
// goal assumptions, never stored here.
struct OperatorScope {
  std::vector<ScopeOp> static_ops;
  std::vector<ScopeOp> literal_ops;
  // indices into static_ops, split by how the operator's syntax begins;
  // identifier-led name parts are bucketed by their first token
  std::unordered_map<std::string, std::vector<int>> ident_led;
  std::vector<int> other_led;    // punctuation parts and name operands
  std::vector<int> operand_led;  // leading value operand (left recursion)
  // same split for literal operators
  std::unordered_map<std::string, std::vector<int>> lit_ident_led;
  std::vector<int> lit_other_led;
  std::vector<int> lit_operand_led;

  std::vector<const ClassDecl*> classes;  // scope order
  // full type namespace: every loaded class, for resolving assumption frames
  std::unordered_map<std::string, const ClassDecl*> types;

  static OperatorScope build(const std::vector<const ClassDecl*>& scope,
                             const std::vector<const ClassDecl*>& all_types);
};

struct OperatorCandidate {
  const OpDecl* op = nullptr;
  // instance operators: frame position from innermost (0) and the frame type
  int frame_depth = -1;
  Ty frame_type;
  int import_idx = 1 << 20;  // statics; instance candidates sort before
  int decl_idx = 0;
  std::map<std::string, Ty> inst;  // tparam name -> fresh var / frame arg
  std::vector<Ty> param_types;     // instantiated
  Ty ret_type;                     // instantiated
};

// All scope operators that could produce `expected`: return type unifies,
// priority admitted by min_rank, requires satisfied by the assumption stack.
// Ordered innermost-frame first, then import order, then declaration order.
// When first_ident is non-empty only identifier-led operators whose first
// name part equals it are considered (plus all non-identifier-led ones).
std::vector<OperatorCandidate> candidates_for(
    const Ty& expected, const std::vector<Ty>& frames, int min_rank,
    bool literal_mode, const OperatorScope& scope, const PriorityOrder& order,
    Subst& s, int* fresh_counter, const std::string& first_ident = "");

// Operators whose syntax begins with a value operand, for left-recursive
// chain growth: no return-type or priority filtering here, the chain applies
// its own admission rules per extension step.
std::vector<OperatorCandidate> leading_candidates(const std::vector<Ty>& frames,
                                                  bool literal_mode,
                                                  const OperatorScope& scope,
                                                  Subst& s,
                                                  int* fresh_counter);

// true iff every required class unifies with some assumption frame; bindings
// made while matching frames persist in s.
bool check_requires(const std::vector<Ty>& required,
                    const std::map<std::string, Ty>& inst,
                    const std::vector<Ty>& frames, Subst& s);

}  // namespace ctx
