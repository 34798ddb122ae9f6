#include "ctx/types.hpp"

#include <algorithm>
#include <tuple>

#include "ctx/scan.hpp"

namespace ctx {

// ---- substitution ----------------------------------------------------------

Ty Subst::shallow(const Ty& t) const {
  Ty cur = t;
  while (cur && cur->k == TypeT::K::Var) {
    auto it = m.find(cur->var);
    if (it == m.end()) break;
    cur = it->second;
  }
  return cur;
}

Ty Subst::resolve(const Ty& t) const {
  Ty cur = shallow(t);
  if (!cur) return cur;
  switch (cur->k) {
    case TypeT::K::Cls: {
      if (cur->args.empty()) return cur;
      std::vector<Ty> args;
      bool changed = false;
      for (const auto& a : cur->args) {
        Ty r = resolve(a);
        changed |= r != a;
        args.push_back(std::move(r));
      }
      return changed ? t_cls(cur->cls, std::move(args)) : cur;
    }
    case TypeT::K::Stile: {
      Ty l = resolve(cur->lhs), r = resolve(cur->rhs);
      return (l == cur->lhs && r == cur->rhs) ? cur : t_stile(l, r);
    }
    default:
      return cur;
  }
}

namespace {

bool occurs(int var, const Ty& t, const Subst& s) {
  Ty r = s.shallow(t);
  switch (r->k) {
    case TypeT::K::Var:
      return r->var == var;
    case TypeT::K::Cls:
      for (const auto& a : r->args)
        if (occurs(var, a, s)) return true;
      return false;
    case TypeT::K::Stile:
      return occurs(var, r->lhs, s) || occurs(var, r->rhs, s);
    default:
      return false;
  }
}

}  // namespace

bool Subst::bind(int var, const Ty& t) {
  if (occurs(var, t, *this)) return false;
  m.emplace(var, t);
  return true;
}

// ---- unification -----------------------------------------------------------

namespace {

bool is_name_term(const Ty& t) {
  return t->k == TypeT::K::Name ||
         (t->k == TypeT::K::Param && t->name_kind) ||
         (t->k == TypeT::K::Var && t->name_kind);
}

bool bind_var(const Ty& v, const Ty& t, Subst& s) {
  if (v->name_kind != is_name_term(t)) return false;
  return s.bind(v->var, t);
}

}  // namespace

bool unify(const Ty& expected, const Ty& actual, Subst& s) {
  Ty e = s.shallow(expected), a = s.shallow(actual);
  if (e->k == TypeT::K::Var && a->k == TypeT::K::Var && e->var == a->var)
    return true;
  if (e->k == TypeT::K::Var) return bind_var(e, a, s);
  if (a->k == TypeT::K::Var) return bind_var(a, e, s);
  if (e->k != a->k) return false;
  switch (e->k) {
    case TypeT::K::Prim:
      return e->prim == a->prim;
    case TypeT::K::Cls: {
      if (e->cls != a->cls || e->args.size() != a->args.size()) return false;
      for (size_t i = 0; i < e->args.size(); i++)
        if (!unify(e->args[i], a->args[i], s)) return false;
      return true;
    }
    case TypeT::K::Stile:
      return unify(e->lhs, a->lhs, s) && unify(e->rhs, a->rhs, s);
    case TypeT::K::Param:
      return e->pname == a->pname && e->name_kind == a->name_kind;
    case TypeT::K::Name:
      return name_ast_equal(e->name, a->name);
    case TypeT::K::Var:
      return false;  // unreachable
  }
  return false;
}

bool null_fits(const Ty& t) {
  switch (t->k) {
    case TypeT::K::Cls:
      return true;
    case TypeT::K::Prim:
      return t->prim == Prim::Str;
    case TypeT::K::Param:
      return !t->name_kind;
    default:
      return false;
  }
}

// ---- built-ins -------------------------------------------------------------

int builtin_class_arity(const std::string& name) {
  if (name == "List" || name == "Optional") return 1;
  if (name == "Map" || name == "Function") return 2;
  if (name == "Closeable" || name == "Lazy") return 0;
  return -1;
}

bool is_builtin_class(const std::string& name) {
  return builtin_class_arity(name) >= 0;
}

std::optional<BuiltinSig> builtin_method(const Ty& recv,
                                         const std::string& name, int fresh0) {
  (void)fresh0;
  if (recv->k == TypeT::K::Prim) {
    switch (recv->prim) {
      case Prim::Int:
        if (name == "plus" || name == "minus" || name == "times")
          return BuiltinSig{{t_int()}, t_int()};
        if (name == "lt" || name == "eq") return BuiltinSig{{t_int()}, t_bool()};
        return std::nullopt;
      case Prim::Str:
        if (name == "concat") return BuiltinSig{{t_str()}, t_str()};
        if (name == "startsWith" || name == "eq")
          return BuiltinSig{{t_str()}, t_bool()};
        if (name == "isEmpty") return BuiltinSig{{}, t_bool()};
        if (name == "length") return BuiltinSig{{}, t_int()};
        if (name == "substring")
          return BuiltinSig{{t_int(), t_int()}, t_str()};
        return std::nullopt;
      case Prim::Bool:
        if (name == "and" || name == "or")
          return BuiltinSig{{t_bool()}, t_bool()};
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }
  // a turnstile value supports exactly one operation: apply(S) -> T
  if (recv->k == TypeT::K::Stile) {
    if (name == "apply") return BuiltinSig{{recv->lhs}, recv->rhs};
    return std::nullopt;
  }
  if (recv->k != TypeT::K::Cls) return std::nullopt;
  const auto& args = recv->args;
  if (recv->cls == "Map" && args.size() == 2) {
    if (name == "get") return BuiltinSig{{args[0]}, args[1]};
    if (name == "put") return BuiltinSig{{args[0], args[1]}, t_unit()};
    if (name == "contains") return BuiltinSig{{args[0]}, t_bool()};
    if (name == "isEmpty") return BuiltinSig{{}, t_bool()};
    if (name == "size") return BuiltinSig{{}, t_int()};
    return std::nullopt;
  }
  if (recv->cls == "List" && args.size() == 1) {
    if (name == "add") return BuiltinSig{{args[0]}, t_unit()};
    if (name == "get") return BuiltinSig{{t_int()}, args[0]};
    if (name == "size") return BuiltinSig{{}, t_int()};
    if (name == "isEmpty") return BuiltinSig{{}, t_bool()};
    return std::nullopt;
  }
  if (recv->cls == "Optional" && args.size() == 1) {
    if (name == "isPresent") return BuiltinSig{{}, t_bool()};
    if (name == "get") return BuiltinSig{{}, args[0]};
    return std::nullopt;
  }
  if (recv->cls == "Function" && args.size() == 2) {
    if (name == "apply") return BuiltinSig{{args[0]}, args[1]};
    return std::nullopt;
  }
  if (recv->cls == "Closeable" && args.empty()) {
    if (name == "readLine") return BuiltinSig{{}, t_str()};
    if (name == "close") return BuiltinSig{{}, t_unit()};
    return std::nullopt;
  }
  return std::nullopt;
}

std::optional<BuiltinSig> builtin_free(const std::string& name, int fresh0) {
  if (name == "println") return BuiltinSig{{t_var(fresh0)}, t_unit()};
  if (name == "isNull") return BuiltinSig{{t_var(fresh0)}, t_bool()};
  if (name == "not") return BuiltinSig{{t_bool()}, t_bool()};
  if (name == "fault") return BuiltinSig{{t_str()}, t_unit()};
  if (name == "some")
    return BuiltinSig{{t_var(fresh0)}, t_cls("Optional", {t_var(fresh0)})};
  if (name == "none")
    return BuiltinSig{{}, t_cls("Optional", {t_var(fresh0)})};
  if (name == "openFile") return BuiltinSig{{t_str()}, t_cls("Closeable")};
  if (name == "tick") return BuiltinSig{{}, t_int()};
  return std::nullopt;
}

Ty instantiate(const Ty& t, const std::map<std::string, Ty>& env) {
  if (!t) return t;
  switch (t->k) {
    case TypeT::K::Param: {
      auto it = env.find(t->pname);
      return it == env.end() ? t : it->second;
    }
    case TypeT::K::Cls: {
      if (t->args.empty()) return t;
      std::vector<Ty> args;
      bool changed = false;
      for (const auto& a : t->args) {
        Ty r = instantiate(a, env);
        changed |= r != a;
        args.push_back(std::move(r));
      }
      return changed ? t_cls(t->cls, std::move(args)) : t;
    }
    case TypeT::K::Stile: {
      Ty l = instantiate(t->lhs, env), r = instantiate(t->rhs, env);
      return (l == t->lhs && r == t->rhs) ? t : t_stile(l, r);
    }
    default:
      return t;
  }
}

// ---- operator scope --------------------------------------------------------

namespace {

// Identifier-led operators bucket under the leading identifier of their first
// name part ("if-exists" buckets under "if").
std::string lead_ident(const std::string& text) {
  if (text.empty() || !is_ident_start(text[0])) return "";
  size_t e = 1;
  while (e < text.size() && is_ident_char(text[e])) e++;
  return text.substr(0, e);
}

}  // namespace

OperatorScope OperatorScope::build(
    const std::vector<const ClassDecl*>& scope,
    const std::vector<const ClassDecl*>& all_types) {
  OperatorScope out;
  out.classes = scope;
  for (const ClassDecl* c : all_types) out.types.emplace(c->name, c);
  for (size_t ci = 0; ci < scope.size(); ci++) {
    const ClassDecl* c = scope[ci];
    for (const auto& op : c->ops) {
      if (!op.is_static) continue;  // instance operators come from frames
      ScopeOp so{&op, (int)ci, op.decl_idx};
      auto& ops = op.is_literal ? out.literal_ops : out.static_ops;
      auto& ident = op.is_literal ? out.lit_ident_led : out.ident_led;
      auto& other = op.is_literal ? out.lit_other_led : out.other_led;
      auto& operand = op.is_literal ? out.lit_operand_led : out.operand_led;
      int idx = (int)ops.size();
      ops.push_back(so);
      const SyntaxElem& head = op.syntax.front();
      if (head.k == SyntaxElem::K::Operand) {
        // single-operand coercions resolve on the typed path; chain growth
        // only handles extensions that consume further input
        if (op.syntax.size() == 1) other.push_back(idx);
        else operand.push_back(idx);
      } else if (head.k == SyntaxElem::K::Part) {
        std::string key = lead_ident(head.text);
        if (key.empty()) other.push_back(idx);
        else ident[key].push_back(idx);
      } else {
        other.push_back(idx);  // name operand first: no fixed leading token
      }
    }
  }
  return out;
}

// ---- candidate enumeration ---------------------------------------------------

namespace {

// Instantiates an operator against its owner frame (instance) or fresh type
// variables (both levels), producing concrete parameter and return types.
bool make_candidate(const OpDecl* op, int frame_depth, const Ty& frame,
                    int import_idx, int* fresh_counter,
                    OperatorCandidate& out) {
  std::map<std::string, Ty> env;
  if (frame) {
    const ClassDecl* cls = op->owner;
    if (cls->tparams.size() != frame->args.size()) return false;
    for (size_t i = 0; i < cls->tparams.size(); i++)
      env[cls->tparams[i].name] = frame->args[i];
  }
  for (const auto& tp : op->tparams)
    env[tp.name] = t_var((*fresh_counter)++, tp.is_name);
  out.op = op;
  out.frame_depth = frame_depth;
  out.frame_type = frame;
  out.import_idx = import_idx;
  out.decl_idx = op->decl_idx;
  out.inst = env;
  out.param_types.clear();
  for (const auto& p : op->params)
    out.param_types.push_back(instantiate(p.type, env));
  out.ret_type = instantiate(op->ret, env);
  return true;
}

bool ret_can_unify(const Ty& expected, const OperatorCandidate& cand,
                   const std::vector<Ty>& frames, const Subst& s) {
  Subst probe = s;  // throwaway branch: real bindings happen during matching
  if (!unify(expected, cand.ret_type, probe)) return false;
  if (!cand.op->requires_classes.empty() &&
      !check_requires(cand.op->requires_classes, cand.inst, frames, probe))
    return false;
  return true;
}

// Instance operators of every assumption frame, innermost (depth 0) first.
template <typename Keep>
void frame_candidates(const std::vector<Ty>& frames, bool literal_mode,
                      const OperatorScope& scope, Subst& s, int* fresh_counter,
                      const Keep& keep,
                      std::vector<OperatorCandidate>& out) {
  if (literal_mode) return;  // literal operators are always static
  for (int depth = 0; depth < (int)frames.size(); depth++) {
    Ty f = s.resolve(frames[(int)frames.size() - 1 - depth]);
    if (!f || f->k != TypeT::K::Cls) continue;
    auto it = scope.types.find(f->cls);
    if (it == scope.types.end()) continue;
    for (const auto& op : it->second->ops) {
      if (op.is_static) continue;
      if (!keep(op)) continue;
      OperatorCandidate cand;
      if (!make_candidate(&op, depth, f, 1 << 20, fresh_counter, cand))
        continue;
      out.push_back(std::move(cand));
    }
  }
}

}  // namespace

std::vector<OperatorCandidate> candidates_for(
    const Ty& expected, const std::vector<Ty>& frames, int min_rank,
    bool literal_mode, const OperatorScope& scope, const PriorityOrder& order,
    Subst& s, int* fresh_counter, const std::string& first_ident) {
  std::vector<OperatorCandidate> out;
  auto admitted = [&](const OpDecl& op) {
    return order.rank_of(op.owner->name, op.prio) >= min_rank;
  };
  auto typed_path = [&](const OpDecl& op) {
    return (op.syntax.front().k != SyntaxElem::K::Operand ||
            op.syntax.size() == 1) &&
           admitted(op);
  };
  frame_candidates(frames, literal_mode, scope, s, fresh_counter, typed_path,
                   out);

  const auto& ops = literal_mode ? scope.literal_ops : scope.static_ops;
  const auto& ident = literal_mode ? scope.lit_ident_led : scope.ident_led;
  const auto& other = literal_mode ? scope.lit_other_led : scope.other_led;
  auto add_static = [&](int idx) {
    const ScopeOp& so = ops[idx];
    if (!admitted(*so.op)) return;
    OperatorCandidate cand;
    if (!make_candidate(so.op, -1, nullptr, so.import_idx, fresh_counter,
                        cand))
      return;
    cand.decl_idx = so.decl_idx;
    out.push_back(std::move(cand));
  };
  if (literal_mode) {
    // literal tokens compose without delimiters, so the maximal identifier at
    // the position may extend past any one operator's first token
    for (const auto& [key, idxs] : ident)
      for (int idx : idxs) add_static(idx);
  } else if (!first_ident.empty()) {
    auto it = ident.find(first_ident);
    if (it != ident.end())
      for (int idx : it->second) add_static(idx);
  }
  for (int idx : other) add_static(idx);

  std::vector<OperatorCandidate> kept;
  for (auto& c : out)
    if (ret_can_unify(expected, c, frames, s)) kept.push_back(std::move(c));
  std::stable_sort(kept.begin(), kept.end(),
                   [](const OperatorCandidate& a, const OperatorCandidate& b) {
                     int da = a.frame_depth < 0 ? 1 << 20 : a.frame_depth;
                     int db = b.frame_depth < 0 ? 1 << 20 : b.frame_depth;
                     return std::tie(da, a.import_idx, a.decl_idx) <
                            std::tie(db, b.import_idx, b.decl_idx);
                   });
  return kept;
}

std::vector<OperatorCandidate> leading_candidates(const std::vector<Ty>& frames,
                                                  bool literal_mode,
                                                  const OperatorScope& scope,
                                                  Subst& s,
                                                  int* fresh_counter) {
  std::vector<OperatorCandidate> out;
  auto chain_led = [](const OpDecl& op) {
    return op.syntax.front().k == SyntaxElem::K::Operand &&
           op.syntax.size() > 1;
  };
  frame_candidates(frames, literal_mode, scope, s, fresh_counter, chain_led,
                   out);
  const auto& ops = literal_mode ? scope.literal_ops : scope.static_ops;
  const auto& idxs = literal_mode ? scope.lit_operand_led : scope.operand_led;
  for (int idx : idxs) {
    const ScopeOp& so = ops[idx];
    OperatorCandidate cand;
    if (!make_candidate(so.op, -1, nullptr, so.import_idx, fresh_counter,
                        cand))
      continue;
    cand.decl_idx = so.decl_idx;
    out.push_back(std::move(cand));
  }
  return out;
}

bool check_requires(const std::vector<Ty>& required,
                    const std::map<std::string, Ty>& inst,
                    const std::vector<Ty>& frames, Subst& s) {
  for (const auto& req : required) {
    Ty want = instantiate(req, inst);
    bool ok = false;
    for (int depth = 0; depth < (int)frames.size() && !ok; depth++) {
      const Ty& f = frames[(int)frames.size() - 1 - depth];
      Subst probe = s;
      if (unify(want, f, probe)) {
        s = std::move(probe);
        ok = true;
      }
    }
    if (!ok) return false;
  }
  return true;
}

}  // namespace ctx
