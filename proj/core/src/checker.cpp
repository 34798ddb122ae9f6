#include "ctx/checker.hpp"

#include <chrono>

namespace ctx {

namespace {

void finalize_types(const Subst& s, const TBlock& b);

// Node types are snapshots taken mid-inference; once the body's final
// substitution is known they are resolved in place. The trees are still
// shared with the parse memo, but that memo is never consulted again for
// these spans.
void finalize_types(const Subst& s, const TExpr& e) {
  TExpr& m = const_cast<TExpr&>(e);
  if (m.type) m.type = s.resolve(m.type);
  if (m.frame) m.frame = s.resolve(m.frame);
  if (m.cl_param_type) m.cl_param_type = s.resolve(m.cl_param_type);
  if (m.cl_ret) m.cl_ret = s.resolve(m.cl_ret);
  for (Ty& t : m.targs) t = s.resolve(t);
  for (const TE& a : e.args)
    if (a) finalize_types(s, *a);
  if (e.body) finalize_types(s, *e.body);
  if (e.base) finalize_types(s, *e.base);
  if (e.block) finalize_types(s, *e.block);
}

void finalize_types(const Subst& s, const TBlock& b) {
  for (const TStmt& st : b.stmts) {
    TStmt& m = const_cast<TStmt&>(st);
    if (m.decl_type) m.decl_type = s.resolve(m.decl_type);
    if (st.a) finalize_types(s, *st.a);
    if (st.base) finalize_types(s, *st.base);
    if (st.iter) finalize_types(s, *st.iter);
    if (st.body) finalize_types(s, *st.body);
    if (st.alt) finalize_types(s, *st.alt);
  }
}

// One member body: own environment frame, own substitution, rigid type
// parameters from the class and the member (member names shadow).
TBlockP check_body(Session& sess, const ClassDecl* cls, bool is_static,
                   const std::vector<TypeParam>& member_tparams, const Ty& ret,
                   const std::vector<Param>& params,
                   const std::vector<Ty>& requires_classes, const KBlock* body,
                   DiagList& diags) {
  BodyCtx& b = sess.body();
  b = BodyCtx{};
  b.self = cls;
  b.in_static = is_static;
  if (cls)
    for (const TypeParam& tp : cls->tparams)
      b.tparams[tp.name] = t_param(tp.name, tp.is_name);
  for (const TypeParam& tp : member_tparams)
    b.tparams[tp.name] = t_param(tp.name, tp.is_name);
  b.ret = ret;
  b.frames = requires_classes;
  sess.env().frames.clear();
  sess.env().push();
  for (const Param& p : params)
    sess.env().define(p.name, p.variadic ? t_cls("List", {p.type}) : p.type);
  TBlockP out;
  if (body) {
    Subst s;
    out = sess.check_block(*body, s, diags);
    if (out) finalize_types(s, *out);
  }
  sess.env().pop();
  return out;
}

}  // namespace

CheckResult check_program(const LinkedProgram& linked,
                          const std::map<const Program*, PriorityOrder>& orders,
                          std::function<void(const std::string&)> trace) {
  CheckResult res;
  for (const auto& unitp : linked.units) {
    const Program* unit = unitp.get();
    auto oit = orders.find(unit);
    if (oit == orders.end())
      throw InternalError("no priority order for " + unit->origin);
    Session sess(&linked, unit, &oit->second);
    if (trace) sess.set_trace(trace);
    auto t0 = std::chrono::steady_clock::now();
    for (const auto& clsp : unit->classes) {
      const ClassDecl* cls = clsp.get();
      TypedClass tc;
      tc.cls = cls;
      for (const OpDecl& op : cls->ops)
        tc.op_bodies.push_back(check_body(sess, cls, op.is_static, op.tparams,
                                          op.ret, op.params,
                                          op.requires_classes, op.body.get(),
                                          res.diags));
      for (const MethodDecl& m : cls->methods)
        tc.method_bodies.push_back(
            check_body(sess, cls, m.is_static, m.tparams, m.ret, m.params,
                       m.requires_classes, m.body.get(), res.diags));
      for (const CtorDecl& ct : cls->ctors)
        tc.ctor_bodies.push_back(check_body(sess, cls, false, {}, t_void(),
                                            ct.params, {}, ct.body.get(),
                                            res.diags));
      res.typed.classes.emplace(cls, std::move(tc));
    }
    if (unit == linked.entry.get() && unit->main_block)
      res.typed.main_body = check_body(sess, nullptr, true, {}, t_void(), {},
                                       {}, unit->main_block.get(), res.diags);
    auto t1 = std::chrono::steady_clock::now();
    sess.stats().wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    res.stats.emplace_back(unit, sess.stats());
  }
  res.ok = !res.diags.has_error();
  return res;
}

}  // namespace ctx
