#include "ctx/runtime.hpp"

#include <ostream>
#include <sstream>

#include "ctx/diag.hpp"

namespace ctx {

EnvP Env::child(EnvP parent) {
  auto e = std::make_shared<Env>();
  e->parent = std::move(parent);
  return e;
}

V* Env::find(const std::string& n) {
  for (Env* e = this; e; e = e->parent.get()) {
    auto it = e->vars.find(n);
    if (it != e->vars.end()) return &it->second;
  }
  return nullptr;
}

void Env::define(const std::string& n, V v) { vars[n] = std::move(v); }

std::shared_ptr<FsHandle> VirtualFS::open(const std::string& path) {
  auto it = files.find(path);
  if (it == files.end()) return nullptr;
  auto h = std::make_shared<FsHandle>();
  h->path = path;
  h->lines = it->second;
  opened.push_back(h);
  return h;
}

V v_int(long long i) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Int;
  v->i = i;
  return v;
}

V v_bool(bool b) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Bool;
  v->b = b;
  return v;
}

V v_str(std::string s) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Str;
  v->s = std::move(s);
  return v;
}

V v_unit() {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Unit;
  return v;
}

V v_null() {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Null;
  return v;
}

bool value_equal(const V& a, const V& b) {
  if (!a || !b) return a == b;
  if (a->k != b->k) return false;
  switch (a->k) {
    case Value::K::Int: return a->i == b->i;
    case Value::K::Bool: return a->b == b->b;
    case Value::K::Str: return a->s == b->s;
    case Value::K::Null:
    case Value::K::Unit: return true;
    default: return a == b;
  }
}

std::string render_value(const V& v) {
  if (!v) return "null";
  switch (v->k) {
    case Value::K::Int: return std::to_string(v->i);
    case Value::K::Bool: return v->b ? "true" : "false";
    case Value::K::Str: return v->s;
    case Value::K::Unit: return "unit";
    case Value::K::Null: return "null";
    case Value::K::Obj:
      return "<" + (v->cls ? v->cls->name : v->s) + ">";
    case Value::K::Closure: return "<closure>";
    case Value::K::List: {
      std::string out = "[";
      for (size_t i = 0; i < v->list.size(); ++i)
        out += (i ? ", " : "") + render_value(v->list[i]);
      return out + "]";
    }
    case Value::K::Map: {
      std::string out = "{";
      for (size_t i = 0; i < v->map.size(); ++i)
        out += (i ? ", " : "") + render_value(v->map[i].first) + ": " +
               render_value(v->map[i].second);
      return out + "}";
    }
    case Value::K::Optional:
      return v->opt_has ? "some(" + render_value(v->opt_v) + ")" : "none";
    case Value::K::Handle:
      return "<handle " + (v->handle ? v->handle->path : "") + ">";
  }
  return "?";
}

namespace {

[[noreturn]] void fault_at(const std::string& msg, const std::string& where) {
  throw FaultSignal{msg, where};
}

V default_value(const Ty& t) {
  if (t && t->k == TypeT::K::Prim) {
    switch (t->prim) {
      case Prim::Int: return v_int(0);
      case Prim::Bool: return v_bool(false);
      case Prim::Str: return v_str("");
      case Prim::Unit: return v_unit();
      default: break;
    }
  }
  return v_null();
}

// Binds declared parameters to already evaluated argument values; a variadic
// tail collects the surplus into a List.
void bind_params(const std::vector<Param>& params, const std::vector<V>& args,
                 size_t first, size_t count, Env& env,
                 const std::string& where) {
  bool variadic = !params.empty() && params.back().variadic;
  size_t fixed = variadic ? params.size() - 1 : params.size();
  if (variadic ? count < fixed : count != fixed)
    fault_at("wrong argument count", where);
  for (size_t i = 0; i < fixed; ++i) env.define(params[i].name, args[first + i]);
  if (variadic) {
    auto rest = std::make_shared<Value>();
    rest->k = Value::K::List;
    for (size_t i = fixed; i < count; ++i) rest->list.push_back(args[first + i]);
    env.define(params.back().name, std::move(rest));
  }
}

// Runs a member body: a fall-through completes with unit, `return` unwinds
// here. Context operand bodies (plain Lams) do not pass through this.
V run_body(const IrP& body, const EnvP& env, Machine& m) {
  if (!body) return v_unit();
  try {
    eval(body, env, m);
  } catch (ReturnSignal& r) {
    return r.value ? r.value : v_unit();
  }
  return v_unit();
}

const LoweredClass& lowered_class(const ClassDecl* cls, Machine& m,
                                  const std::string& where) {
  auto it = m.prog->classes.find(cls);
  if (it == m.prog->classes.end())
    fault_at("no body for class " + cls->name, where);
  return it->second;
}

V eval_builtin(const Ir& ir, std::vector<V>& vals, Machine& m) {
  const std::string& w = ir.where;
  auto arg = [&](size_t i) -> V& { return vals.at(i); };
  auto want = [&](size_t i, Value::K k, const char* what) -> V& {
    V& v = arg(i);
    if (!v || v->k != k) fault_at(std::string(what) + " expected", w);
    return v;
  };
  if (!ir.has_recv) {
    if (ir.s == "println") {
      *m.out << render_value(arg(0)) << "\n";
      return v_unit();
    }
    if (ir.s == "isNull") return v_bool(arg(0)->k == Value::K::Null);
    if (ir.s == "not") return v_bool(!want(0, Value::K::Bool, "Bool")->b);
    if (ir.s == "fault") fault_at(want(0, Value::K::Str, "Str")->s, w);
    if (ir.s == "some") {
      auto v = std::make_shared<Value>();
      v->k = Value::K::Optional;
      v->opt_has = true;
      v->opt_v = arg(0);
      return v;
    }
    if (ir.s == "none") {
      auto v = std::make_shared<Value>();
      v->k = Value::K::Optional;
      return v;
    }
    if (ir.s == "openFile") {
      if (!m.vfs) fault_at("no filesystem", w);
      const std::string& path = want(0, Value::K::Str, "Str")->s;
      auto h = m.vfs->open(path);
      if (!h) fault_at("no such file: " + path, w);
      auto v = std::make_shared<Value>();
      v->k = Value::K::Handle;
      v->handle = std::move(h);
      return v;
    }
    if (ir.s == "tick") return v_int(++m.counters["tick"]);
    throw InternalError("unknown built-in " + ir.s);
  }

  V& recv = arg(0);
  if (!recv) fault_at("call on null", w);
  switch (recv->k) {
    case Value::K::Int: {
      long long a = recv->i;
      long long b2 = vals.size() > 1 ? want(1, Value::K::Int, "Int")->i : 0;
      if (ir.s == "plus") return v_int(a + b2);
      if (ir.s == "minus") return v_int(a - b2);
      if (ir.s == "times") return v_int(a * b2);
      if (ir.s == "lt") return v_bool(a < b2);
      if (ir.s == "eq") return v_bool(a == b2);
      break;
    }
    case Value::K::Str: {
      const std::string& a = recv->s;
      if (ir.s == "concat") return v_str(a + want(1, Value::K::Str, "Str")->s);
      if (ir.s == "startsWith") {
        const std::string& p = want(1, Value::K::Str, "Str")->s;
        return v_bool(a.compare(0, p.size(), p) == 0);
      }
      if (ir.s == "eq") return v_bool(a == want(1, Value::K::Str, "Str")->s);
      if (ir.s == "isEmpty") return v_bool(a.empty());
      if (ir.s == "length") return v_int((long long)a.size());
      if (ir.s == "substring") {
        long long lo = want(1, Value::K::Int, "Int")->i;
        long long hi = want(2, Value::K::Int, "Int")->i;
        if (lo < 0 || hi < lo || hi > (long long)a.size())
          fault_at("substring out of range", w);
        return v_str(a.substr((size_t)lo, (size_t)(hi - lo)));
      }
      break;
    }
    case Value::K::Bool: {
      if (ir.s == "and")
        return v_bool(recv->b && want(1, Value::K::Bool, "Bool")->b);
      if (ir.s == "or")
        return v_bool(recv->b || want(1, Value::K::Bool, "Bool")->b);
      break;
    }
    case Value::K::Map: {
      if (ir.s == "get") {
        for (auto& [k, v] : recv->map)
          if (value_equal(k, arg(1))) return v;
        return v_null();  // absent keys read as null, mirroring isNull
      }
      if (ir.s == "put") {
        for (auto& [k, v] : recv->map)
          if (value_equal(k, arg(1))) {
            v = arg(2);
            return v_unit();
          }
        recv->map.emplace_back(arg(1), arg(2));
        return v_unit();
      }
      if (ir.s == "contains") {
        for (auto& [k, v] : recv->map)
          if (value_equal(k, arg(1))) return v_bool(true);
        return v_bool(false);
      }
      if (ir.s == "isEmpty") return v_bool(recv->map.empty());
      if (ir.s == "size") return v_int((long long)recv->map.size());
      break;
    }
    case Value::K::List: {
      if (ir.s == "add") {
        recv->list.push_back(arg(1));
        return v_unit();
      }
      if (ir.s == "get") {
        long long i = want(1, Value::K::Int, "Int")->i;
        if (i < 0 || i >= (long long)recv->list.size())
          fault_at("index out of range", w);
        return recv->list[(size_t)i];
      }
      if (ir.s == "size") return v_int((long long)recv->list.size());
      if (ir.s == "isEmpty") return v_bool(recv->list.empty());
      break;
    }
    case Value::K::Optional: {
      if (ir.s == "isPresent") return v_bool(recv->opt_has);
      if (ir.s == "get") {
        if (!recv->opt_has) fault_at("empty optional", w);
        return recv->opt_v;
      }
      break;
    }
    case Value::K::Handle: {
      FsHandle& h = *recv->handle;
      if (ir.s == "readLine") {
        if (h.closed) fault_at("read on closed handle", w);
        if (h.next >= h.lines.size()) return v_null();
        return v_str(h.lines[h.next++]);
      }
      if (ir.s == "close") {
        h.close_calls++;
        h.closed = true;
        return v_unit();
      }
      break;
    }
    default:
      break;
  }
  fault_at("no method " + ir.s + " on " + render_value(recv), w);
}

}  // namespace

V eval(const IrP& ir, const EnvP& env, Machine& m) {
  if (!ir) return v_unit();
  m.steps++;
  switch (ir->k) {
    case Ir::K::Lit:
      switch (ir->lit_kind) {
        case Prim::Int: return v_int(ir->lit_int);
        case Prim::Bool: return v_bool(ir->lit_bool);
        case Prim::Str: return v_str(ir->lit_str);
        case Prim::Null: return v_null();
        default: return v_unit();
      }
    case Ir::K::GetLocal: {
      V* v = env->find(ir->s);
      if (!v) throw InternalError("unbound local " + ir->s + " at " + ir->where);
      return *v;
    }
    case Ir::K::SetLocal: {
      V v = eval(ir->kids[0], env, m);
      if (ir->declare) {
        env->define(ir->s, std::move(v));
      } else {
        V* slot = env->find(ir->s);
        if (!slot)
          throw InternalError("unbound local " + ir->s + " at " + ir->where);
        *slot = std::move(v);
      }
      return v_unit();
    }
    case Ir::K::GetField: {
      V base = eval(ir->kids[0], env, m);
      if (!base || base->k != Value::K::Obj)
        fault_at("field access on " + render_value(base), ir->where);
      auto it = base->fields.find(ir->s);
      if (it == base->fields.end())
        throw InternalError("no field " + ir->s + " at " + ir->where);
      return it->second;
    }
    case Ir::K::SetField: {
      V base = eval(ir->kids[0], env, m);
      V v = eval(ir->kids[1], env, m);
      if (!base || base->k != Value::K::Obj)
        fault_at("field access on " + render_value(base), ir->where);
      base->fields[ir->s] = std::move(v);
      return v_unit();
    }
    case Ir::K::Lam: {
      auto v = std::make_shared<Value>();
      v->k = Value::K::Closure;
      v->params = {ir->s};
      v->body = ir->kids[0];
      v->captured = env;
      return v;
    }
    case Ir::K::Closure: {
      auto v = std::make_shared<Value>();
      v->k = Value::K::Closure;
      v->params = ir->names;
      v->body = ir->kids[0];
      v->captured = env;
      v->catches_return = true;
      return v;
    }
    case Ir::K::App: {
      V f = eval(ir->kids[0], env, m);
      V a = eval(ir->kids[1], env, m);
      if (!f || f->k != Value::K::Closure)
        fault_at("apply of " + render_value(f), ir->where);
      EnvP inner = Env::child(f->captured);
      inner->define(f->params.at(0), std::move(a));
      // `fun` closures are return boundaries; context operand thunks are not,
      // their `return` unwinds to the enclosing operator call
      if (f->catches_return) return run_body(f->body, inner, m);
      return eval(f->body, inner, m);
    }
    case Ir::K::CallOp: {
      std::vector<V> vals;
      vals.reserve(ir->kids.size());
      for (const IrP& k : ir->kids) vals.push_back(eval(k, env, m));
      const OpDecl* op = ir->op;
      const LoweredClass& lc = lowered_class(op->owner, m, ir->where);
      const IrP& body = lc.op_bodies.at(op - op->owner->ops.data());
      EnvP inner = Env::child(nullptr);
      size_t first = ir->has_recv ? 1 : 0;
      if (ir->has_recv) inner->define("this", vals[0]);
      size_t nreq = op->requires_classes.size();
      bind_params(op->params, vals, first, vals.size() - first - nreq, *inner,
                  ir->where);
      for (size_t i = 0; i < nreq; ++i)
        inner->define("$req" + std::to_string(i),
                      vals[vals.size() - nreq + i]);
      return run_body(body, inner, m);
    }
    case Ir::K::CallMethod: {
      std::vector<V> vals;
      vals.reserve(ir->kids.size());
      for (const IrP& k : ir->kids) vals.push_back(eval(k, env, m));
      const MethodDecl* md = ir->method;
      const LoweredClass& lc = lowered_class(md->owner, m, ir->where);
      const IrP& body =
          lc.method_bodies.at(md - md->owner->methods.data());
      EnvP inner = Env::child(nullptr);
      size_t first = ir->has_recv ? 1 : 0;
      if (ir->has_recv) {
        if (!vals[0] || vals[0]->k != Value::K::Obj)
          fault_at("call on " + render_value(vals[0]), ir->where);
        inner->define("this", vals[0]);
      }
      size_t nreq = md->requires_classes.size();
      bind_params(md->params, vals, first, vals.size() - first - nreq, *inner,
                  ir->where);
      for (size_t i = 0; i < nreq; ++i)
        inner->define("$req" + std::to_string(i),
                      vals[vals.size() - nreq + i]);
      return run_body(body, inner, m);
    }
    case Ir::K::New: {
      std::vector<V> vals;
      vals.reserve(ir->kids.size());
      for (const IrP& k : ir->kids) vals.push_back(eval(k, env, m));
      auto v = std::make_shared<Value>();
      if (!ir->cls) {
        if (ir->s == "Map") {
          v->k = Value::K::Map;
        } else if (ir->s == "List") {
          v->k = Value::K::List;
        } else {
          v->k = Value::K::Obj;  // frame-only classes such as Lazy
          v->s = ir->s;
        }
        return v;
      }
      v->k = Value::K::Obj;
      v->cls = ir->cls;
      for (const FieldDecl& f : ir->cls->fields)
        v->fields[f.name] = default_value(f.type);
      if (ir->ctor_idx >= 0) {
        const CtorDecl& ct = ir->cls->ctors.at((size_t)ir->ctor_idx);
        const LoweredClass& lc = lowered_class(ir->cls, m, ir->where);
        EnvP inner = Env::child(nullptr);
        inner->define("this", v);
        bind_params(ct.params, vals, 0, vals.size(), *inner, ir->where);
        run_body(lc.ctor_bodies.at((size_t)ir->ctor_idx), inner, m);
      }
      return v;
    }
    case Ir::K::Seq: {
      EnvP scope = Env::child(env);
      for (const IrP& k : ir->kids) eval(k, scope, m);
      return v_unit();
    }
    case Ir::K::If: {
      V c = eval(ir->kids[0], env, m);
      if (!c || c->k != Value::K::Bool)
        fault_at("condition is " + render_value(c), ir->where);
      if (c->b) return eval(ir->kids[1], env, m);
      if (ir->kids.size() > 2) return eval(ir->kids[2], env, m);
      return v_unit();
    }
    case Ir::K::While: {
      for (;;) {
        V c = eval(ir->kids[0], env, m);
        if (!c || c->k != Value::K::Bool)
          fault_at("condition is " + render_value(c), ir->where);
        if (!c->b) return v_unit();
        eval(ir->kids[1], env, m);
      }
    }
    case Ir::K::ForEach: {
      V list = eval(ir->kids[0], env, m);
      if (!list || list->k != Value::K::List)
        fault_at("iteration over " + render_value(list), ir->where);
      for (const V& item : list->list) {
        EnvP scope = Env::child(env);
        scope->define(ir->s, item);
        eval(ir->kids[1], scope, m);
      }
      return v_unit();
    }
    case Ir::K::Return:
      throw ReturnSignal{ir->kids.empty() ? v_unit()
                                          : eval(ir->kids[0], env, m)};
    case Ir::K::TryFinally: {
      try {
        eval(ir->kids[0], env, m);
      } catch (...) {
        eval(ir->kids[1], env, m);
        throw;
      }
      eval(ir->kids[1], env, m);
      return v_unit();
    }
    case Ir::K::Builtin: {
      std::vector<V> vals;
      vals.reserve(ir->kids.size());
      for (const IrP& k : ir->kids) vals.push_back(eval(k, env, m));
      return eval_builtin(*ir, vals, m);
    }
  }
  throw InternalError("unhandled node at " + ir->where);
}

RunResult run_program(const LoweredProgram& prog, VirtualFS& vfs,
                      std::ostream& out, std::ostream& err) {
  RunResult r;
  Machine m;
  m.prog = &prog;
  m.vfs = &vfs;
  m.out = &out;
  if (!prog.main_ir) return r;
  try {
    EnvP top = Env::child(nullptr);
    eval(prog.main_ir, top, m);
  } catch (ReturnSignal&) {
    // a bare return ends the program normally
  } catch (FaultSignal& f) {
    r.fault = "fault: " + f.message + " at " + f.where;
    err << r.fault << "\n";
    r.exit_code = 1;
  }
  return r;
}

}  // namespace ctx
