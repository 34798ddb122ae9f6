#include "ctx/lower.hpp"

#include <algorithm>
#include <sstream>

#include "ctx/diag.hpp"

namespace ctx {

namespace {

IrP getlocal(const std::string& n, const std::string& where) {
  auto ir = std::make_shared<Ir>();
  ir->k = Ir::K::GetLocal;
  ir->s = n;
  ir->where = where;
  return ir;
}

// Lowers one unit's typed bodies. Assumption frames live on a lexical stack:
// the member's required frames come in as hidden parameters, Context operands
// push one Lam parameter each. Everything else is plain tree rewriting.
struct Lowerer {
  const std::string* origin = nullptr;
  std::vector<std::pair<Ty, std::string>> frames;  // innermost last
  int next_frame = 0;

  std::string where(int off) const {
    return *origin + ":" + std::to_string(off);
  }

  // Innermost frame matching the wanted type; instance operators were checked
  // against exactly one of these, so a miss is an implementation bug.
  std::string frame_local(const Ty& want, int off) const {
    for (auto it = frames.rbegin(); it != frames.rend(); ++it)
      if (type_equal(it->first, want)) return it->second;
    // required frames of generic members stay parametric in the declaration;
    // fall back to the class head
    if (want->k == TypeT::K::Cls)
      for (auto it = frames.rbegin(); it != frames.rend(); ++it)
        if (it->first->k == TypeT::K::Cls && it->first->cls == want->cls)
          return it->second;
    throw InternalError("no enclosing assumption " + render_type(want) +
                        " at " + where(off));
  }

  IrP expr(const TE& e) {
    if (!e) throw InternalError("missing expression during lowering");
    auto ir = std::make_shared<Ir>();
    ir->where = where(e->off);
    switch (e->k) {
      case TExpr::K::Lit:
        ir->k = Ir::K::Lit;
        ir->lit_kind = e->lit_kind;
        ir->lit_int = e->lit_int;
        ir->lit_bool = e->lit_bool;
        ir->lit_str = e->lit_str;
        break;
      case TExpr::K::Null:
        ir->k = Ir::K::Lit;
        ir->lit_kind = Prim::Null;
        break;
      case TExpr::K::Local:
        ir->k = Ir::K::GetLocal;
        ir->s = e->name;
        break;
      case TExpr::K::SelfField:
        ir->k = Ir::K::GetField;
        ir->s = e->name;
        ir->kids.push_back(getlocal("this", ir->where));
        break;
      case TExpr::K::FieldRead:
        ir->k = Ir::K::GetField;
        ir->s = e->name;
        ir->kids.push_back(expr(e->base));
        break;
      case TExpr::K::New:
        ir->k = Ir::K::New;
        ir->s = e->name;
        ir->cls = e->cls;
        ir->ctor_idx = e->ctor_idx;
        for (const TE& a : e->args) ir->kids.push_back(expr(a));
        break;
      case TExpr::K::OpApp: {
        ir->k = Ir::K::CallOp;
        ir->op = e->op;
        if (!e->op->is_static) {
          ir->has_recv = true;
          ir->kids.push_back(
              getlocal(frame_local(e->frame, e->off), ir->where));
        }
        for (const TE& a : e->args) ir->kids.push_back(expr(a));
        for (const Ty& rq : e->op->requires_classes)
          ir->kids.push_back(getlocal(frame_local(rq, e->off), ir->where));
        break;
      }
      case TExpr::K::Context: {
        ir->k = Ir::K::Lam;
        ir->s = "$frame" + std::to_string(next_frame++);
        frames.emplace_back(e->frame, ir->s);
        ir->kids.push_back(expr(e->body));
        frames.pop_back();
        break;
      }
      case TExpr::K::Block:
        return block(e->block, e->off);
      case TExpr::K::Call:
        if (e->method) {
          ir->k = Ir::K::CallMethod;
          ir->method = e->method;
          ir->has_recv = true;
          ir->kids.push_back(expr(e->base));
          for (const TE& a : e->args) ir->kids.push_back(expr(a));
          for (const Ty& rq : e->method->requires_classes)
            ir->kids.push_back(getlocal(frame_local(rq, e->off), ir->where));
        } else if (e->is_apply) {
          ir->k = Ir::K::App;
          ir->kids.push_back(expr(e->base));
          ir->kids.push_back(expr(e->args.at(0)));
        } else {
          ir->k = Ir::K::Builtin;
          ir->s = e->name;
          ir->has_recv = true;
          ir->kids.push_back(expr(e->base));
          for (const TE& a : e->args) ir->kids.push_back(expr(a));
        }
        break;
      case TExpr::K::BareCall:
        if (e->method) {
          ir->k = Ir::K::CallMethod;
          ir->method = e->method;
          for (const TE& a : e->args) ir->kids.push_back(expr(a));
          for (const Ty& rq : e->method->requires_classes)
            ir->kids.push_back(getlocal(frame_local(rq, e->off), ir->where));
        } else {
          ir->k = Ir::K::Builtin;
          ir->s = e->name;
          for (const TE& a : e->args) ir->kids.push_back(expr(a));
        }
        break;
      case TExpr::K::Closure:
        ir->k = Ir::K::Closure;
        ir->names.push_back(e->cl_param);
        ir->kids.push_back(block(e->block, e->off));
        break;
      case TExpr::K::NameLit:
        // names exist only at parse time; a surviving occurrence is inert
        ir->k = Ir::K::Lit;
        ir->lit_kind = Prim::Unit;
        break;
    }
    return ir;
  }

  IrP stmt(const TStmt& st) {
    auto ir = std::make_shared<Ir>();
    ir->where = where(st.off);
    switch (st.k) {
      case KStmt::K::Local:
        ir->k = Ir::K::SetLocal;
        ir->s = st.name;
        ir->declare = true;
        ir->kids.push_back(expr(st.a));
        break;
      case KStmt::K::Expr:
        if (st.assign_local) {
          ir->k = Ir::K::SetLocal;
          ir->s = st.name;
          ir->kids.push_back(expr(st.a));
        } else if (st.assign_field) {
          ir->k = Ir::K::SetField;
          ir->s = st.name;
          ir->kids.push_back(st.base ? expr(st.base)
                                     : getlocal("this", ir->where));
          ir->kids.push_back(expr(st.a));
        } else {
          return expr(st.a);
        }
        break;
      case KStmt::K::If:
        ir->k = Ir::K::If;
        ir->kids.push_back(expr(st.a));
        ir->kids.push_back(block(st.body, st.off));
        if (st.alt) ir->kids.push_back(block(st.alt, st.off));
        break;
      case KStmt::K::While:
        ir->k = Ir::K::While;
        ir->kids.push_back(expr(st.a));
        ir->kids.push_back(block(st.body, st.off));
        break;
      case KStmt::K::ForEach:
        ir->k = Ir::K::ForEach;
        ir->s = st.name;
        ir->kids.push_back(expr(st.iter));
        ir->kids.push_back(block(st.body, st.off));
        break;
      case KStmt::K::Return:
        ir->k = Ir::K::Return;
        if (st.has_value) ir->kids.push_back(expr(st.a));
        break;
      case KStmt::K::TryFinally:
        ir->k = Ir::K::TryFinally;
        ir->kids.push_back(block(st.body, st.off));
        ir->kids.push_back(block(st.alt, st.off));
        break;
      case KStmt::K::Block:
        return block(st.body, st.off);
    }
    return ir;
  }

  IrP block(const TBlockP& b, int off) {
    if (!b) throw InternalError("missing block during lowering");
    auto ir = std::make_shared<Ir>();
    ir->k = Ir::K::Seq;
    ir->where = where(b->off > 0 ? b->off : off);
    for (const TStmt& st : b->stmts) ir->kids.push_back(stmt(st));
    return ir;
  }

  // Member bodies see their required frames as hidden trailing parameters,
  // in declaration order; call sites pass them in the same order.
  IrP member(const TBlockP& body, const std::vector<Ty>& requires_classes,
             int off) {
    frames.clear();
    next_frame = 0;
    for (size_t i = 0; i < requires_classes.size(); ++i)
      frames.emplace_back(requires_classes[i], "$req" + std::to_string(i));
    return block(body, off);
  }
};

}  // namespace

IrP lower_expr(const TE& e,
               const std::vector<std::pair<Ty, std::string>>& frame_envs,
               const std::string& origin) {
  Lowerer lw;
  lw.origin = &origin;
  lw.frames = frame_envs;
  return lw.expr(e);
}

LoweredProgram lower_program(const TypedProgram& typed,
                             const LinkedProgram& linked) {
  LoweredProgram out;
  for (const auto& unitp : linked.units) {
    Lowerer lw;
    lw.origin = &unitp->origin;
    for (const auto& clsp : unitp->classes) {
      const ClassDecl* cls = clsp.get();
      auto it = typed.classes.find(cls);
      if (it == typed.classes.end()) continue;
      const TypedClass& tc = it->second;
      LoweredClass lc;
      lc.cls = cls;
      for (size_t i = 0; i < cls->ops.size(); ++i)
        lc.op_bodies.push_back(
            tc.op_bodies.at(i)
                ? lw.member(tc.op_bodies[i], cls->ops[i].requires_classes,
                            cls->ops[i].off)
                : nullptr);
      for (size_t i = 0; i < cls->methods.size(); ++i)
        lc.method_bodies.push_back(
            tc.method_bodies.at(i)
                ? lw.member(tc.method_bodies[i],
                            cls->methods[i].requires_classes,
                            cls->methods[i].off)
                : nullptr);
      for (size_t i = 0; i < cls->ctors.size(); ++i)
        lc.ctor_bodies.push_back(tc.ctor_bodies.at(i)
                                     ? lw.member(tc.ctor_bodies[i], {},
                                                 cls->ctors[i].off)
                                     : nullptr);
      out.classes.emplace(cls, std::move(lc));
    }
  }
  if (typed.main_body) {
    Lowerer lw;
    lw.origin = &linked.entry->origin;
    out.main_ir = lw.member(typed.main_body, {}, linked.entry->main_off);
  }
  return out;
}

// ---- rendering ---------------------------------------------------------------

namespace {

void render(const IrP& ir, std::ostream& os) {
  if (!ir) {
    os << "()";
    return;
  }
  auto kids = [&](size_t from = 0) {
    for (size_t i = from; i < ir->kids.size(); ++i) {
      os << " ";
      render(ir->kids[i], os);
    }
  };
  switch (ir->k) {
    case Ir::K::Lit:
      switch (ir->lit_kind) {
        case Prim::Int: os << "(lit " << ir->lit_int << ")"; break;
        case Prim::Bool: os << (ir->lit_bool ? "(lit true)" : "(lit false)"); break;
        case Prim::Str: os << "(lit \"" << ir->lit_str << "\")"; break;
        case Prim::Null: os << "(lit null)"; break;
        default: os << "(lit unit)"; break;
      }
      break;
    case Ir::K::GetLocal:
      os << "(local " << ir->s << ")";
      break;
    case Ir::K::SetLocal:
      os << (ir->declare ? "(let " : "(set! ") << ir->s;
      kids();
      os << ")";
      break;
    case Ir::K::GetField:
      os << "(field " << ir->s;
      kids();
      os << ")";
      break;
    case Ir::K::SetField:
      os << "(set-field! " << ir->s;
      kids();
      os << ")";
      break;
    case Ir::K::Lam:
      os << "(lam " << ir->s;
      kids();
      os << ")";
      break;
    case Ir::K::App:
      os << "(app";
      kids();
      os << ")";
      break;
    case Ir::K::CallOp: {
      const ClassDecl* owner = ir->op->owner;
      os << "(call-op " << owner->name << "/"
         << (ir->op - owner->ops.data());
      kids();
      os << ")";
      break;
    }
    case Ir::K::CallMethod:
      os << "(call " << ir->method->owner->name << "." << ir->method->name;
      kids();
      os << ")";
      break;
    case Ir::K::New:
      os << "(new " << ir->s;
      if (ir->ctor_idx >= 0) os << "/" << ir->ctor_idx;
      kids();
      os << ")";
      break;
    case Ir::K::Seq:
      os << "(seq";
      kids();
      os << ")";
      break;
    case Ir::K::If:
      os << "(if";
      kids();
      os << ")";
      break;
    case Ir::K::While:
      os << "(while";
      kids();
      os << ")";
      break;
    case Ir::K::ForEach:
      os << "(foreach " << ir->s;
      kids();
      os << ")";
      break;
    case Ir::K::Return:
      os << "(return";
      kids();
      os << ")";
      break;
    case Ir::K::TryFinally:
      os << "(try-finally";
      kids();
      os << ")";
      break;
    case Ir::K::Closure:
      os << "(closure (";
      for (size_t i = 0; i < ir->names.size(); ++i)
        os << (i ? " " : "") << ir->names[i];
      os << ")";
      kids();
      os << ")";
      break;
    case Ir::K::Builtin:
      os << "(builtin " << ir->s;
      kids();
      os << ")";
      break;
  }
}

}  // namespace

std::string dump_ir(const IrP& ir) {
  std::ostringstream os;
  render(ir, os);
  return os.str();
}

std::string dump_program(const LoweredProgram& lp) {
  std::ostringstream os;
  std::vector<const LoweredClass*> ordered;
  for (const auto& [cls, lc] : lp.classes) ordered.push_back(&lc);
  std::sort(ordered.begin(), ordered.end(),
            [](const LoweredClass* a, const LoweredClass* b) {
              return a->cls->name < b->cls->name;
            });
  for (const LoweredClass* lcp : ordered) {
    const LoweredClass& lc = *lcp;
    const ClassDecl* cls = lc.cls;
    os << "class " << cls->name << "\n";
    for (size_t i = 0; i < lc.op_bodies.size(); ++i)
      os << "  op " << i << ": " << render_operator(cls->ops[i]) << "\n    "
         << dump_ir(lc.op_bodies[i]) << "\n";
    for (size_t i = 0; i < lc.method_bodies.size(); ++i)
      os << "  method " << cls->methods[i].name << "\n    "
         << dump_ir(lc.method_bodies[i]) << "\n";
    for (size_t i = 0; i < lc.ctor_bodies.size(); ++i)
      os << "  ctor " << i << "\n    " << dump_ir(lc.ctor_bodies[i]) << "\n";
  }
  if (lp.main_ir) os << "main\n  " << dump_ir(lp.main_ir) << "\n";
  return os.str();
}

}  // namespace ctx
