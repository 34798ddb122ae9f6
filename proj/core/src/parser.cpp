#include "ctx/parser.hpp"

#include <algorithm>
#include <set>

#include "ctx/scan.hpp"

namespace ctx {

namespace {

// Literal-mode token: matched at the exact position, no whitespace skipping
// and no right-delimiting (letters compose).
int lit_tok(const std::string& s, int pos, int limit, const std::string& tok) {
  if (pos + (int)tok.size() > limit) return -1;
  if (s.compare(pos, tok.size(), tok) != 0) return -1;
  return pos + (int)tok.size();
}

bool has_var(const Ty& t) {
  switch (t->k) {
    case TypeT::K::Var:
      return true;
    case TypeT::K::Cls:
      for (const Ty& a : t->args)
        if (has_var(a)) return true;
      return false;
    case TypeT::K::Stile:
      return has_var(t->lhs) || has_var(t->rhs);
    default:
      return false;
  }
}

// Serialization for memo keys: unification variables are renamed by first
// occurrence so alpha-equivalent goals share entries.
void ser_ty(const Ty& t0, const Subst& s, std::string& out,
            std::vector<int>* vars, std::vector<bool>* kinds) {
  Ty t = s.shallow(t0);
  switch (t->k) {
    case TypeT::K::Prim: {
      switch (t->prim) {
        case Prim::Int: out += 'i'; break;
        case Prim::Bool: out += 'b'; break;
        case Prim::Str: out += 's'; break;
        case Prim::Void: out += 'v'; break;
        case Prim::Unit: out += 'u'; break;
        case Prim::Null: out += '0'; break;
      }
      return;
    }
    case TypeT::K::Var: {
      int slot = -1;
      if (vars) {
        for (size_t i = 0; i < vars->size(); ++i)
          if ((*vars)[i] == t->var) { slot = (int)i; break; }
        if (slot < 0) {
          slot = (int)vars->size();
          vars->push_back(t->var);
          if (kinds) kinds->push_back(t->name_kind);
        }
      }
      out += '?';
      if (t->name_kind) out += 'n';
      out += std::to_string(slot);
      return;
    }
    case TypeT::K::Cls: {
      out += 'C';
      out += t->cls;
      if (!t->args.empty()) {
        out += '<';
        for (size_t i = 0; i < t->args.size(); ++i) {
          if (i) out += ',';
          ser_ty(t->args[i], s, out, vars, kinds);
        }
        out += '>';
      }
      return;
    }
    case TypeT::K::Stile:
      out += '[';
      ser_ty(t->lhs, s, out, vars, kinds);
      out += "|-";
      ser_ty(t->rhs, s, out, vars, kinds);
      out += ']';
      return;
    case TypeT::K::Param:
      out += '\'';
      if (t->name_kind) out += 'n';
      out += t->pname;
      return;
    case TypeT::K::Name:
      out += 'N';
      out += erase_name(t->name, 0);
      return;
  }
}

// Exact-duplicate frames collapse keeping the innermost occurrence; survivors
// keep their outer-to-inner order. Frames are ground, so serializing them does
// not allocate variable slots.
void ser_frames(const std::vector<Ty>& frames, const Subst& s, std::string& out,
                std::vector<int>* vars, std::vector<bool>* kinds) {
  std::vector<std::string> sers(frames.size());
  std::vector<bool> keep(frames.size(), false);
  std::set<std::string> seen;
  for (size_t i = frames.size(); i-- > 0;) {
    std::string f;
    ser_ty(frames[i], s, f, vars, kinds);
    sers[i] = std::move(f);
    if (seen.insert(sers[i]).second) keep[i] = true;
  }
  for (size_t i = 0; i < frames.size(); ++i)
    if (keep[i]) {
      out += ";F";
      out += sers[i];
    }
}

// Rewrites a fully resolved type into canonical slot space for memo storage.
Ty canon_ty(const Ty& t, std::map<int, int>& slot_of, int& next,
            std::vector<bool>& kinds) {
  switch (t->k) {
    case TypeT::K::Var: {
      auto it = slot_of.find(t->var);
      int slot;
      if (it == slot_of.end()) {
        slot = next++;
        slot_of[t->var] = slot;
        kinds.push_back(t->name_kind);
      } else {
        slot = it->second;
      }
      return t_var(slot, t->name_kind);
    }
    case TypeT::K::Cls: {
      std::vector<Ty> args;
      args.reserve(t->args.size());
      for (const Ty& a : t->args) args.push_back(canon_ty(a, slot_of, next, kinds));
      return t_cls(t->cls, std::move(args));
    }
    case TypeT::K::Stile:
      return t_stile(canon_ty(t->lhs, slot_of, next, kinds),
                     canon_ty(t->rhs, slot_of, next, kinds));
    default:
      return t;
  }
}

Ty uncanon_ty(const Ty& t, const std::vector<Ty>& slots) {
  switch (t->k) {
    case TypeT::K::Var:
      if (t->var < 0 || t->var >= (int)slots.size())
        throw InternalError("memo slot out of range");
      return slots[t->var];
    case TypeT::K::Cls: {
      std::vector<Ty> args;
      args.reserve(t->args.size());
      for (const Ty& a : t->args) args.push_back(uncanon_ty(a, slots));
      return t_cls(t->cls, std::move(args));
    }
    case TypeT::K::Stile:
      return t_stile(uncanon_ty(t->lhs, slots), uncanon_ty(t->rhs, slots));
    default:
      return t;
  }
}

// Strictly better per the disambiguation order: longest first, then kernel
// roots, then frame depth / import order / declaration order.
bool beats(const PValue& a, const PValue& b) {
  if (a.end != b.end) return a.end > b.end;
  if (a.kernel_root != b.kernel_root) return a.kernel_root;
  return a.ord < b.ord;
}

void merge_fail(ParseOutcome& fail, const ParseOutcome& child) {
  if (child.furthest > fail.furthest) {
    fail.furthest = child.furthest;
    fail.expected_toks = child.expected_toks;
  } else if (child.furthest == fail.furthest) {
    fail.expected_toks.insert(fail.expected_toks.end(),
                              child.expected_toks.begin(),
                              child.expected_toks.end());
  }
}

const TypeParam* find_tp(const OpDecl* op, const std::string& n) {
  for (const auto& tp : op->tparams)
    if (tp.name == n) return &tp;
  if (op->owner) return op->owner->find_tparam(n);
  return nullptr;
}

// A chain extension may reuse one scope candidate along a branch that already
// bound its variables, so every attempt re-instantiates the operator's own
// type parameters.
OperatorCandidate refresh_cand(const OperatorCandidate& c, int* fresh) {
  OperatorCandidate out = c;
  std::map<std::string, Ty> env;
  if (c.frame_type) {
    const ClassDecl* cls = c.op->owner;
    for (size_t i = 0; i < cls->tparams.size(); ++i)
      env[cls->tparams[i].name] = c.frame_type->args[i];
  }
  for (const auto& tp : c.op->tparams)
    env[tp.name] = t_var((*fresh)++, tp.is_name);
  out.inst = env;
  out.param_types.clear();
  for (const auto& p : c.op->params)
    out.param_types.push_back(instantiate(p.type, env));
  out.ret_type = instantiate(c.op->ret, env);
  return out;
}

NameP to_name(const TE& e) {
  if (!e || e->k != TExpr::K::OpApp || !e->op || !e->op->is_literal)
    return nullptr;
  auto n = std::make_shared<NameAst>();
  n->op = e->op;
  for (const TE& a : e->args) {
    NameP k = to_name(a);
    if (!k) return nullptr;
    n->kids.push_back(std::move(k));
  }
  return n;
}

bool is_kernel_kw(const std::string& id) {
  return id == "new" || id == "fun" || id == "null" || id == "true" ||
         id == "false";
}

std::string render_expected(std::vector<std::string> toks) {
  std::sort(toks.begin(), toks.end());
  toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
  if (toks.empty()) return "cannot parse expression";
  std::string out = "expected ";
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += (i + 1 == toks.size()) ? " or " : ", ";
    out += toks[i];
  }
  return out;
}

struct FramesSwap {
  BodyCtx* b;
  std::vector<Ty> saved;
  FramesSwap(BodyCtx& bc, const std::vector<Ty>& frames)
      : b(&bc), saved(bc.frames) {
    b->frames = frames;
  }
  ~FramesSwap() { b->frames = std::move(saved); }
};

}  // namespace

void LexEnv::define(const std::string& n, const Ty& t) {
  if (frames.empty()) frames.emplace_back();
  frames.back().vars[n] = t;
}

const Ty* LexEnv::lookup(const std::string& n) const {
  for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
    auto f = it->vars.find(n);
    if (f != it->vars.end()) return &f->second;
  }
  return nullptr;
}

struct Session::MemoEntry {
  bool ok = false;
  int limit = 0;
  int goal_vars = 0;
  std::vector<bool> slot_kind;
  TE node;
  int end = 0;
  Ty type;
  int root_rank = 0;
  bool kernel_root = false;
  std::array<int, 3> ord{};
  std::vector<std::pair<int, Ty>> bindings;  // goal slot -> canonical type
  int furthest = 0;
  std::vector<std::string> expected;
};

struct Session::ChainElem {
  PValue v;  // type resolved under the growth branch when recorded
  Subst s;   // growth-branch bindings; node types reference these vars
  int rounds = 0;
  bool extended = false;  // pure seeds are excluded from chain results
};

Session::Session(const LinkedProgram* linked, const Program* unit,
                 const PriorityOrder* order)
    : linked_(linked), unit_(unit), src_(unit->src.get()), order_(order) {
  scope_order_ = linked->scope_classes(*unit);
  scope_ = OperatorScope::build(scope_order_, linked->all_classes());
  stats_.input_length = (long long)src_->size();
  limit_ = (int)src_->size();
}

Session::~Session() = default;

std::string Session::canonical_goal(const Goal& g, const Subst& s,
                                    std::vector<int>* varlist) const {
  std::string out = "E";
  std::vector<int> local;
  std::vector<int>* vars = varlist ? varlist : &local;
  ser_ty(g.expected, s, out, vars, nullptr);
  ser_frames(g.frames, s, out, vars, nullptr);
  out += ";R";
  out += std::to_string(g.min_rank);
  if (g.literal_mode) out += ";L";
  return out;
}

void Session::note_fail(ParseOutcome& fail, int pos,
                        const std::string& expected) {
  if (pos > fail.furthest) {
    fail.furthest = pos;
    fail.expected_toks = {expected};
  } else if (pos == fail.furthest) {
    fail.expected_toks.push_back(expected);
  }
}

PValue Session::better(const PValue& a, const PValue& b) const {
  return beats(b, a) ? b : a;
}

// ---- memo ------------------------------------------------------------------

ParseOutcome Session::parse_expr(int pos, const Goal& goal, Subst& s) {
  if (!goal.literal_mode) pos = skip_ws(*src_, pos, limit_);
  std::vector<int> varlist;
  std::vector<bool> varkinds;
  std::string lang;
  {
    std::string out = "E";
    ser_ty(goal.expected, s, out, &varlist, &varkinds);
    ser_frames(goal.frames, s, out, &varlist, &varkinds);
    out += ";R";
    out += std::to_string(goal.min_rank);
    if (goal.literal_mode) out += ";L";
    lang = std::move(out);
  }
  languages_[lang];
  stats_.languages_seen = (long long)languages_.size();
  std::string mkey =
      std::to_string(pos) + "#" + std::to_string(limit_) + "#" + lang;
  auto it = memo_.find(mkey);
  if (it != memo_.end()) {
    if (!it->second) {
      // re-entered while in progress: a unit-coercion cycle, not a parse
      poisoned_ = true;
      ParseOutcome f;
      f.furthest = pos;
      return f;
    }
    const MemoEntry& e = *it->second;
    if (e.limit != limit_) throw InternalError("memo limit mismatch");
    if ((int)varlist.size() != e.goal_vars)
      throw InternalError("memo goal shape mismatch");
    std::vector<Ty> slots(e.slot_kind.size());
    for (size_t i = 0; i < slots.size(); ++i) {
      if ((int)i < e.goal_vars)
        slots[i] = t_var(varlist[i], e.slot_kind[i]);
      else
        slots[i] = t_var(fresh_var(), e.slot_kind[i]);
    }
    for (const auto& [slot, cty] : e.bindings) {
      if (!unify(slots[slot], uncanon_ty(cty, slots), s))
        throw InternalError("memo replay unify failed");
    }
    ParseOutcome o;
    o.ok = e.ok;
    if (e.ok) {
      o.v.node = e.node;
      o.v.end = e.end;
      o.v.type = uncanon_ty(e.type, slots);
      o.v.root_rank = e.root_rank;
      o.v.kernel_root = e.kernel_root;
      o.v.ord = e.ord;
    } else {
      o.furthest = e.furthest;
      o.expected_toks = e.expected;
    }
    return o;
  }

  stats_.evaluations++;
  if (trace_) trace_("eval " + std::to_string(pos) + " " + lang);
  memo_[mkey] = nullptr;  // in-progress marker
  bool saved_poison = poisoned_;
  poisoned_ = false;
  ParseOutcome o = eval_goal(pos, goal, s);
  bool me_poisoned = poisoned_;
  poisoned_ = saved_poison || me_poisoned;
  if (me_poisoned) {
    // computed while a chain at this position was still growing; the result
    // may be incomplete, so it is not cached
    memo_.erase(mkey);
  } else {
    auto e = std::make_unique<MemoEntry>();
    e->limit = limit_;
    e->goal_vars = (int)varlist.size();
    e->slot_kind = varkinds;
    e->ok = o.ok;
    if (o.ok) {
      std::map<int, int> slot_of;
      int next = (int)varlist.size();
      for (size_t i = 0; i < varlist.size(); ++i) slot_of[varlist[i]] = (int)i;
      for (size_t i = 0; i < varlist.size(); ++i) {
        Ty r = s.resolve(t_var(varlist[i], varkinds[i]));
        if (r->k == TypeT::K::Var && r->var == varlist[i]) continue;
        e->bindings.push_back({(int)i, canon_ty(r, slot_of, next, e->slot_kind)});
      }
      e->type = canon_ty(s.resolve(o.v.type), slot_of, next, e->slot_kind);
      e->node = o.v.node;
      e->end = o.v.end;
      e->root_rank = o.v.root_rank;
      e->kernel_root = o.v.kernel_root;
      e->ord = o.v.ord;
    } else {
      e->furthest = o.furthest;
      e->expected = o.expected_toks;
    }
    memo_[mkey] = std::move(e);
  }
  stats_.memo_entries = (long long)memo_.size();
  if (trace_)
    trace_((o.ok ? "ok   " : "fail ") + std::to_string(pos) + " " + lang +
           (o.ok ? " ->" + std::to_string(o.v.end) : ""));
  return o;
}

ParseOutcome Session::eval_goal(int pos, const Goal& goal, Subst& s) {
  std::vector<std::pair<PValue, Subst>> results;
  ParseOutcome fail;
  fail.furthest = pos;
  typed_candidates(pos, goal, s, results, fail);
  chain_candidates(pos, goal, s, results, fail);
  kernel_candidates(pos, goal, s, results, fail);
  if (results.empty()) {
    std::sort(fail.expected_toks.begin(), fail.expected_toks.end());
    fail.expected_toks.erase(
        std::unique(fail.expected_toks.begin(), fail.expected_toks.end()),
        fail.expected_toks.end());
    return fail;
  }
  size_t best = 0;
  for (size_t i = 1; i < results.size(); ++i)
    if (beats(results[i].first, results[best].first)) best = i;
  s = std::move(results[best].second);
  ParseOutcome o;
  o.ok = true;
  o.v = std::move(results[best].first);
  return o;
}

// ---- typed path ------------------------------------------------------------

void Session::typed_candidates(int pos, const Goal& goal, Subst& s,
                               std::vector<std::pair<PValue, Subst>>& out,
                               ParseOutcome& fail) {
  int p = goal.literal_mode ? pos : skip_ws(*src_, pos, limit_);
  std::string first = ident_at(*src_, p, limit_);
  auto cands = candidates_for(goal.expected, goal.frames, goal.min_rank,
                              goal.literal_mode, scope_, *order_, s, &fresh_,
                              first);
  for (const auto& c : cands) {
    Subst branch = s;
    PValue v;
    if (match_operator(c, pos, goal, branch, v, fail, nullptr))
      out.emplace_back(std::move(v), std::move(branch));
  }
}

bool Session::parse_ctx_operand(int pos, const Ty& ptype, int min_rank,
                                const std::vector<Ty>& frames, bool lit,
                                Subst& s, TE* node, int* end,
                                ParseOutcome& fail) {
  Ty pt = s.resolve(ptype);
  Goal sub;
  sub.min_rank = min_rank;
  sub.literal_mode = lit;
  sub.frames = frames;
  Ty frame;
  if (pt->k == TypeT::K::Stile) {
    frame = pt->lhs;
    if (has_var(frame)) {
      note_fail(fail, lit ? pos : skip_ws(*src_, pos, limit_),
                "a ground assumption type");
      return false;
    }
    sub.expected = pt->rhs;
    sub.frames.push_back(frame);
  } else {
    sub.expected = pt;
  }
  ParseOutcome r = parse_expr(pos, sub, s);
  if (!r.ok) {
    merge_fail(fail, r);
    return false;
  }
  TE result = r.v.node;
  if (frame) {
    auto ctx = std::make_shared<TExpr>();
    ctx->k = TExpr::K::Context;
    ctx->frame = frame;
    ctx->body = result;
    ctx->type = pt;
    ctx->off = result ? result->off : pos;
    result = std::move(ctx);
  }
  *node = std::move(result);
  *end = r.v.end;
  return true;
}

bool Session::match_operator(const OperatorCandidate& cand, int pos,
                             const Goal& goal, Subst& s, PValue& out,
                             ParseOutcome& fail, const ChainElem* seed) {
  const OpDecl* op = cand.op;
  const bool lit = goal.literal_mode;
  if (!seed && !unify(goal.expected, cand.ret_type, s)) return false;
  size_t nparams = op->params.size();
  bool variadic = nparams > 0 && op->params.back().variadic;
  std::vector<TE> fixed(nparams);
  std::vector<TE> rep_items;
  std::map<std::string, NameP> names;
  int cur = pos;
  size_t operand_idx = 0;
  size_t ei = 0;

  if (seed) {
    if (op->syntax.empty() || op->syntax[0].k != SyntaxElem::K::Operand)
      return false;
    int smin =
        slot_min_rank(*order_, op->owner->name, op->prio, op->syntax[0].prio);
    if (seed->v.root_rank < smin) return false;
    Ty p0 = s.resolve(cand.param_types[0]);
    if (p0->k == TypeT::K::Stile) return false;  // leading operands are values
    if (!unify(p0, seed->v.type, s)) return false;
    fixed[0] = seed->v.node;
    cur = seed->v.end;
    operand_idx = 1;
    ei = 1;
  }

  for (; ei < op->syntax.size(); ++ei) {
    const SyntaxElem& el = op->syntax[ei];
    if (el.k == SyntaxElem::K::Part) {
      int n = lit ? lit_tok(*src_, cur, limit_, el.text)
                  : match_tok(*src_, cur, limit_, el.text);
      if (n < 0) {
        note_fail(fail, lit ? cur : skip_ws(*src_, cur, limit_),
                  "'" + el.text + "'");
        return false;
      }
      cur = n;
    } else if (el.k == SyntaxElem::K::NameOp) {
      const TypeParam* tp = find_tp(op, el.text);
      auto ii = cand.inst.find(el.text);
      if (!tp || !tp->is_name || ii == cand.inst.end()) return false;
      Ty cb = s.shallow(ii->second);
      NameP bound = (cb->k == TypeT::K::Name) ? cb->name : nullptr;
      int npos = lit ? cur : skip_ws(*src_, cur, limit_);
      NameP got;
      ParseOutcome r = parse_name_occurrence(npos, tp->name_type, bound, s, &got);
      if (!r.ok) {
        merge_fail(fail, r);
        return false;
      }
      if (!bound && !unify(ii->second, t_name(got), s)) return false;
      names[el.text] = got;
      cur = r.v.end;
    } else {  // Operand
      if (operand_idx >= nparams) return false;
      int smin = slot_min_rank(*order_, op->owner->name, op->prio, el.prio);
      if (el.rep == Rep::One) {
        TE a;
        int e2;
        if (!parse_ctx_operand(cur, cand.param_types[operand_idx], smin,
                               goal.frames, lit, s, &a, &e2, fail))
          return false;
        fixed[operand_idx++] = std::move(a);
        cur = e2;
      } else {
        // greedy repetition on the last (variadic) parameter; trailing parts
        // are retried dropping items from the right
        Ty pt = cand.param_types[nparams - 1];
        std::vector<Subst> snaps;
        std::vector<int> starts;
        for (;;) {
          Subst snap = s;
          int start = cur;
          TE a;
          int e2;
          ParseOutcome rf;
          rf.furthest = cur;
          if (!parse_ctx_operand(cur, pt, smin, goal.frames, lit, s, &a, &e2,
                                 rf)) {
            s = std::move(snap);
            merge_fail(fail, rf);
            break;
          }
          if (e2 <= start) {  // zero progress would repeat forever
            s = std::move(snap);
            break;
          }
          snaps.push_back(std::move(snap));
          starts.push_back(start);
          rep_items.push_back(std::move(a));
          cur = e2;
        }
        std::vector<const SyntaxElem*> tail;
        for (size_t j = ei + 1; j < op->syntax.size(); ++j) {
          if (op->syntax[j].k != SyntaxElem::K::Part) return false;
          tail.push_back(&op->syntax[j]);
        }
        size_t mink = (el.rep == Rep::Plus) ? 1 : 0;
        for (;;) {
          int tcur = cur;
          bool okTail = true;
          for (const SyntaxElem* te : tail) {
            int n = lit ? lit_tok(*src_, tcur, limit_, te->text)
                        : match_tok(*src_, tcur, limit_, te->text);
            if (n < 0) {
              okTail = false;
              note_fail(fail, lit ? tcur : skip_ws(*src_, tcur, limit_),
                        "'" + te->text + "'");
              break;
            }
            tcur = n;
          }
          if (okTail) {
            cur = tcur;
            break;
          }
          if (rep_items.size() <= mink) return false;
          s = std::move(snaps.back());
          snaps.pop_back();
          cur = starts.back();
          starts.pop_back();
          rep_items.pop_back();
        }
        operand_idx++;
        ei = op->syntax.size();  // tail consumed
        break;
      }
    }
  }

  if (!check_requires(op->requires_classes, cand.inst, goal.frames, s)) {
    note_fail(fail, pos, "a required assumption");
    return false;
  }

  auto node = std::make_shared<TExpr>();
  node->k = TExpr::K::OpApp;
  node->op = op;
  node->off = pos;
  node->frame = cand.frame_type;
  node->names = std::move(names);
  node->type = cand.ret_type;
  if (variadic) {
    node->args.assign(fixed.begin(), fixed.end() - 1);
    for (auto& r : rep_items) node->args.push_back(std::move(r));
  } else {
    node->args = std::move(fixed);
  }
  out.node = std::move(node);
  out.end = cur;
  out.type = cand.ret_type;
  out.kernel_root = false;
  if (op->is_literal)
    out.root_rank = 1 << 28;  // lexical operators are priority-exempt
  else
    out.root_rank = op->prio.empty() ? PriorityOrder::kBottom
                                     : order_->rank_of(op->owner->name, op->prio);
  out.ord = {cand.frame_depth < 0 ? (1 << 20) : cand.frame_depth,
             cand.import_idx, cand.decl_idx};
  return true;
}

// ---- left recursion ----------------------------------------------------------

void Session::chain_candidates(int pos, const Goal& goal, Subst& s,
                               std::vector<std::pair<PValue, Subst>>& out,
                               ParseOutcome& fail) {
  (void)fail;
  if (!goal.literal_mode) pos = skip_ws(*src_, pos, limit_);
  const auto& chain = grow_left_recursion(pos, goal, s);
  for (const ChainElem& e : chain) {
    if (!e.extended) continue;
    if (e.v.root_rank < goal.min_rank) continue;
    Subst branch = s;
    // growth-local vars never collide with caller vars, and growth never
    // binds a var the caller already owns, so an absent-key union is exact
    for (const auto& [var, ty] : e.s.m) branch.m.emplace(var, ty);
    if (!unify(goal.expected, e.v.type, branch)) continue;
    out.emplace_back(e.v, std::move(branch));
  }
}

const std::vector<Session::ChainElem>& Session::grow_left_recursion(
    int pos, const Goal& goal, Subst& s) {
  std::string key = std::to_string(pos) + "#" + std::to_string(limit_);
  ser_frames(goal.frames, s, key, nullptr, nullptr);
  if (goal.literal_mode) key += ";L";
  auto it = chains_.find(key);
  if (it != chains_.end()) {
    if (growing_.count(key)) poisoned_ = true;  // left-recursive re-entry
    return *it->second;
  }
  auto& slot = chains_[key];
  slot = std::make_unique<std::vector<ChainElem>>();
  std::vector<ChainElem>& vec = *slot;
  growing_.insert(key);

  struct GrowItem {
    PValue v;
    Subst s;
    int rounds = 0;
    bool extended = false;
  };
  std::vector<GrowItem> items;
  {
    Goal sg;
    sg.expected = t_var(fresh_var());
    sg.frames = goal.frames;
    sg.min_rank = PriorityOrder::kBottom;
    sg.literal_mode = goal.literal_mode;
    std::vector<std::pair<PValue, Subst>> seeds;
    ParseOutcome sf;
    sf.furthest = pos;
    typed_candidates(pos, sg, s, seeds, sf);
    kernel_candidates(pos, sg, s, seeds, sf);
    for (auto& [pv, ps] : seeds) {
      GrowItem gi;
      gi.v = std::move(pv);
      gi.v.type = ps.resolve(gi.v.type);
      gi.s = std::move(ps);
      items.push_back(std::move(gi));
    }
  }
  auto leading =
      leading_candidates(goal.frames, goal.literal_mode, scope_, s, &fresh_);
  size_t lo = 0;
  while (lo < items.size()) {
    size_t hi = items.size();
    for (size_t i = lo; i < hi; ++i) {
      for (const auto& cand0 : leading) {
        OperatorCandidate cand = refresh_cand(cand0, &fresh_);
        Subst es = items[i].s;
        ChainElem base{items[i].v, {}, items[i].rounds, items[i].extended};
        PValue nv;
        ParseOutcome ef;
        ef.furthest = pos;
        if (!match_operator(cand, pos, goal, es, nv, ef, &base)) continue;
        if (nv.end <= items[i].v.end) continue;  // extensions must consume
        GrowItem gi;
        gi.v = std::move(nv);
        gi.v.type = es.resolve(gi.v.type);
        gi.s = std::move(es);
        gi.rounds = items[i].rounds + 1;
        gi.extended = true;
        items.push_back(std::move(gi));
      }
    }
    if (items.size() > hi) stats_.grow_rounds++;
    lo = hi;
  }
  vec.reserve(items.size());
  for (auto& gi : items)
    vec.push_back(
        ChainElem{std::move(gi.v), std::move(gi.s), gi.rounds, gi.extended});
  growing_.erase(key);
  return vec;
}

// ---- kernel forms ------------------------------------------------------------

void Session::kernel_candidates(int pos, const Goal& g, Subst& s,
                                std::vector<std::pair<PValue, Subst>>& out,
                                ParseOutcome& fail) {
  k_literals(pos, g, s, out, fail);
  if (g.literal_mode) return;  // names are built from operators only
  k_paren(pos, g, s, out, fail);
  k_block(pos, g, s, out, fail);
  k_new(pos, g, s, out, fail);
  k_closure(pos, g, s, out, fail);
  k_ident_chain(pos, g, s, out, fail);
}

bool Session::k_literals(int pos, const Goal& g, Subst& s0,
                         std::vector<std::pair<PValue, Subst>>& out,
                         ParseOutcome& fail) {
  int p = g.literal_mode ? pos : skip_ws(*src_, pos, limit_);
  if (p >= limit_) {
    note_fail(fail, p, "an expression");
    return false;
  }
  char c = (*src_)[p];
  if (c == '"') {
    std::string v;
    int e = lex_str_lit(*src_, p, limit_, &v);
    if (e < 0) {
      note_fail(fail, p, "a closed string literal");
      return false;
    }
    Subst b = s0;
    if (!unify(g.expected, t_str(), b)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Lit;
    n->lit_kind = Prim::Str;
    n->lit_str = std::move(v);
    n->type = t_str();
    n->off = p;
    out.push_back({PValue{std::move(n), e, t_str(), 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  if (c >= '0' && c <= '9') {
    long long v = 0;
    int e = lex_int_lit(*src_, p, limit_, &v);
    if (e <= p) return false;
    Subst b = s0;
    if (!unify(g.expected, t_int(), b)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Lit;
    n->lit_kind = Prim::Int;
    n->lit_int = v;
    n->type = t_int();
    n->off = p;
    out.push_back({PValue{std::move(n), e, t_int(), 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  auto kw = [&](const char* tok) {
    return g.literal_mode ? -1 : match_tok(*src_, p, limit_, tok);
  };
  if (int e = kw("true"); e >= 0) {
    Subst b = s0;
    if (!unify(g.expected, t_bool(), b)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Lit;
    n->lit_kind = Prim::Bool;
    n->lit_bool = true;
    n->type = t_bool();
    n->off = p;
    out.push_back({PValue{std::move(n), e, t_bool(), 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  if (int e = kw("false"); e >= 0) {
    Subst b = s0;
    if (!unify(g.expected, t_bool(), b)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Lit;
    n->lit_kind = Prim::Bool;
    n->lit_bool = false;
    n->type = t_bool();
    n->off = p;
    out.push_back({PValue{std::move(n), e, t_bool(), 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  if (int e = kw("null"); e >= 0) {
    Subst b = s0;
    Ty want = b.resolve(g.expected);
    if (!null_fits(want)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Null;
    n->type = want;
    n->off = p;
    out.push_back({PValue{std::move(n), e, want, 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  return false;
}

bool Session::k_paren(int pos, const Goal& g, Subst& s0,
                      std::vector<std::pair<PValue, Subst>>& out,
                      ParseOutcome& fail) {
  int p = match_tok(*src_, pos, limit_, "(");
  if (p < 0) return false;
  Goal sub{g.expected, g.frames, PriorityOrder::kBottom, false};
  Subst b = s0;
  ParseOutcome r = parse_expr(p, sub, b);
  if (!r.ok) {
    merge_fail(fail, r);
    return false;
  }
  int e = match_tok(*src_, r.v.end, limit_, ")");
  if (e < 0) {
    note_fail(fail, skip_ws(*src_, r.v.end, limit_), "')'");
    return false;
  }
  out.push_back({PValue{r.v.node, e, r.v.type, 1 << 28, true,
                        {1 << 20, 1 << 20, 1 << 20}},
                 std::move(b)});
  return true;
}

bool Session::k_block(int pos, const Goal& g, Subst& s0,
                      std::vector<std::pair<PValue, Subst>>& out,
                      ParseOutcome& fail) {
  Ty want = s0.resolve(g.expected);
  if (want->k != TypeT::K::Prim || want->prim != Prim::Void) return false;
  int p = match_tok(*src_, pos, limit_, "{");
  if (p < 0) {
    note_fail(fail, skip_ws(*src_, pos, limit_), "a block");
    return false;
  }
  int close = scan_to_depth0(*src_, p, limit_, "}");
  if (close < 0) {
    note_fail(fail, p, "'}'");
    return false;
  }
  KBlock kb;
  DiagList rd;
  if (!read_stmts(*src_, unit_->origin, p, close, kb, rd) || rd.has_error()) {
    int at = rd.items.empty() ? p : rd.items.front().offset;
    note_fail(fail, at, "a statement");
    return false;
  }
  Subst b = s0;
  DiagList cd;
  TBlockP tb;
  {
    FramesSwap guard(body_, g.frames);
    tb = check_block(kb, b, cd);
  }
  if (cd.has_error()) {
    note_fail(fail, cd.items.front().offset, cd.items.front().message);
    return false;
  }
  auto n = std::make_shared<TExpr>();
  n->k = TExpr::K::Block;
  n->block = tb;
  n->type = t_void();
  n->off = pos;
  out.push_back({PValue{std::move(n), close + 1, t_void(), 1 << 28, true,
                        {1 << 20, 1 << 20, 1 << 20}},
                 std::move(b)});
  return true;
}

bool Session::k_new(int pos, const Goal& g, Subst& s0,
                    std::vector<std::pair<PValue, Subst>>& out,
                    ParseOutcome& fail) {
  int p = match_tok(*src_, pos, limit_, "new");
  if (p < 0) return false;
  int q = skip_ws(*src_, p, limit_);
  std::string cname = ident_at(*src_, q, limit_);
  if (cname.empty()) {
    note_fail(fail, q, "a class name");
    return false;
  }
  int cur = lex_ident_end(*src_, q, limit_);
  std::vector<Ty> targs;
  if (int lt = match_tok(*src_, cur, limit_, "<"); lt >= 0) {
    cur = lt;
    for (;;) {
      auto t = parse_type_at(&cur);
      if (!t) {
        note_fail(fail, skip_ws(*src_, cur, limit_), "a type argument");
        return false;
      }
      targs.push_back(*t);
      if (int c2 = match_tok(*src_, cur, limit_, ","); c2 >= 0) {
        cur = c2;
        continue;
      }
      int gt = match_tok(*src_, cur, limit_, ">");
      if (gt < 0) {
        note_fail(fail, skip_ws(*src_, cur, limit_), "'>'");
        return false;
      }
      cur = gt;
      break;
    }
  }

  int barity = builtin_class_arity(cname);
  if (barity >= 0) {
    if ((int)targs.size() != barity) {
      note_fail(fail, q, "type arguments for " + cname);
      return false;
    }
    if (cname == "Function" || cname == "Closeable" || cname == "Optional") {
      note_fail(fail, q, "an instantiable class");
      return false;
    }
    Ty ty = t_cls(cname, targs);
    Subst b = s0;
    if (!unify(g.expected, ty, b)) return false;
    std::vector<TE> args;
    int e2;
    if (!parse_args(cur, {}, false, g, b, args, &e2, fail)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::New;
    n->name = cname;
    n->targs = targs;
    n->type = ty;
    n->off = pos;
    out.push_back({PValue{std::move(n), e2, ty, 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }

  const ClassDecl* cls = linked_->find_class(cname);
  if (!cls) {
    note_fail(fail, q, "a class name");
    return false;
  }
  if (targs.size() != cls->tparams.size()) {
    note_fail(fail, q, "type arguments for " + cname);
    return false;
  }
  std::map<std::string, Ty> inst;
  for (size_t i = 0; i < targs.size(); ++i)
    inst[cls->tparams[i].name] = targs[i];
  Ty ty = t_cls(cname, targs);
  Subst b0 = s0;
  if (!unify(g.expected, ty, b0)) return false;
  if (cls->ctors.empty()) {
    Subst b = b0;
    std::vector<TE> args;
    int e2;
    if (!parse_args(cur, {}, false, g, b, args, &e2, fail)) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::New;
    n->name = cname;
    n->cls = cls;
    n->targs = targs;
    n->type = ty;
    n->off = pos;
    out.push_back({PValue{std::move(n), e2, ty, 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  for (size_t ci = 0; ci < cls->ctors.size(); ++ci) {
    const CtorDecl& ctor = cls->ctors[ci];
    std::vector<Ty> ptypes;
    bool variadic =
        !ctor.params.empty() && ctor.params.back().variadic;
    for (const Param& pr : ctor.params)
      ptypes.push_back(instantiate(pr.type, inst));
    Subst b = b0;
    std::vector<TE> args;
    int e2;
    if (!parse_args(cur, ptypes, variadic, g, b, args, &e2, fail)) continue;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::New;
    n->name = cname;
    n->cls = cls;
    n->ctor_idx = (int)ci;
    n->targs = targs;
    n->args = std::move(args);
    n->type = ty;
    n->off = pos;
    out.push_back({PValue{std::move(n), e2, ty, 1 << 28, true,
                          {1 << 20, 1 << 20, 1 << 20}},
                   std::move(b)});
    return true;
  }
  return false;
}

bool Session::k_closure(int pos, const Goal& g, Subst& s0,
                        std::vector<std::pair<PValue, Subst>>& out,
                        ParseOutcome& fail) {
  int p = match_tok(*src_, pos, limit_, "fun");
  if (p < 0) return false;
  int cur = match_tok(*src_, p, limit_, "(");
  if (cur < 0) {
    note_fail(fail, skip_ws(*src_, p, limit_), "'('");
    return false;
  }
  auto pt = parse_type_at(&cur);
  if (!pt) {
    note_fail(fail, skip_ws(*src_, cur, limit_), "a parameter type");
    return false;
  }
  int q = skip_ws(*src_, cur, limit_);
  std::string pname = ident_at(*src_, q, limit_);
  if (pname.empty()) {
    note_fail(fail, q, "a parameter name");
    return false;
  }
  cur = lex_ident_end(*src_, q, limit_);
  cur = match_tok(*src_, cur, limit_, ")");
  if (cur < 0) {
    note_fail(fail, q, "')'");
    return false;
  }
  cur = match_tok(*src_, cur, limit_, ":");
  if (cur < 0) {
    note_fail(fail, cur, "':'");
    return false;
  }
  auto rt = parse_type_at(&cur);
  if (!rt) {
    note_fail(fail, skip_ws(*src_, cur, limit_), "a return type");
    return false;
  }
  int ob = match_tok(*src_, cur, limit_, "{");
  if (ob < 0) {
    note_fail(fail, skip_ws(*src_, cur, limit_), "'{'");
    return false;
  }
  int close = scan_to_depth0(*src_, ob, limit_, "}");
  if (close < 0) {
    note_fail(fail, ob, "'}'");
    return false;
  }
  Ty fty = t_cls("Function", {*pt, *rt});
  Subst b = s0;
  if (!unify(g.expected, fty, b)) return false;
  KBlock kb;
  DiagList rd;
  if (!read_stmts(*src_, unit_->origin, ob, close, kb, rd) || rd.has_error()) {
    int at = rd.items.empty() ? ob : rd.items.front().offset;
    note_fail(fail, at, "a statement");
    return false;
  }
  DiagList cd;
  TBlockP tb;
  {
    FramesSwap guard(body_, g.frames);
    Ty saved_ret = body_.ret;
    body_.ret = *rt;
    env_.push();
    env_.define(pname, *pt);
    tb = check_block(kb, b, cd);
    env_.pop();
    body_.ret = saved_ret;
  }
  if (cd.has_error()) {
    note_fail(fail, cd.items.front().offset, cd.items.front().message);
    return false;
  }
  auto n = std::make_shared<TExpr>();
  n->k = TExpr::K::Closure;
  n->cl_param = pname;
  n->cl_param_type = *pt;
  n->cl_ret = *rt;
  n->block = tb;
  n->type = fty;
  n->off = pos;
  out.push_back({PValue{std::move(n), close + 1, fty, 1 << 28, true,
                        {1 << 20, 1 << 20, 1 << 20}},
                 std::move(b)});
  return true;
}

bool Session::parse_args(int pos, const std::vector<Ty>& ptypes, bool variadic,
                         const Goal& g, Subst& s, std::vector<TE>& args,
                         int* end, ParseOutcome& fail) {
  int cur = match_tok(*src_, pos, limit_, "(");
  if (cur < 0) {
    note_fail(fail, skip_ws(*src_, pos, limit_), "'('");
    return false;
  }
  size_t fixed = variadic ? ptypes.size() - 1 : ptypes.size();
  if (int e = match_tok(*src_, cur, limit_, ")"); e >= 0) {
    if (fixed > 0) {
      note_fail(fail, skip_ws(*src_, cur, limit_), "an argument");
      return false;
    }
    *end = e;
    return true;
  }
  size_t i = 0;
  for (;;) {
    if (i > 0) {
      int c2 = match_tok(*src_, cur, limit_, ",");
      if (c2 < 0) break;
      cur = c2;
    }
    if (!variadic && i >= ptypes.size()) {
      note_fail(fail, skip_ws(*src_, cur, limit_), "')'");
      return false;
    }
    Ty pt = i < fixed ? ptypes[i] : ptypes.back();
    TE a;
    int e2;
    if (!parse_ctx_operand(cur, pt, PriorityOrder::kBottom, g.frames, false, s,
                           &a, &e2, fail))
      return false;
    args.push_back(std::move(a));
    cur = e2;
    ++i;
  }
  if (i < fixed) {
    note_fail(fail, skip_ws(*src_, cur, limit_), "an argument");
    return false;
  }
  int e = match_tok(*src_, cur, limit_, ")");
  if (e < 0) {
    note_fail(fail, skip_ws(*src_, cur, limit_), "')'");
    return false;
  }
  *end = e;
  return true;
}

bool Session::k_ident_chain(int pos, const Goal& g, Subst& s0,
                            std::vector<std::pair<PValue, Subst>>& out,
                            ParseOutcome& fail) {
  int p = skip_ws(*src_, pos, limit_);
  std::string id = ident_at(*src_, p, limit_);
  if (id.empty() || is_kernel_kw(id)) return false;
  Subst s = s0;
  TE base;
  Ty bt;
  int cur = lex_ident_end(*src_, p, limit_);

  if (id == "this") {
    if (!body_.self || body_.in_static) return false;
    int d = match_tok(*src_, cur, limit_, ".");
    if (d < 0) {
      note_fail(fail, skip_ws(*src_, cur, limit_), "'.'");
      return false;
    }
    int fq = skip_ws(*src_, d, limit_);
    std::string fn = ident_at(*src_, fq, limit_);
    const FieldDecl* fd = fn.empty() ? nullptr : body_.self->find_field(fn);
    if (!fd) {
      note_fail(fail, fq, "a field of " + body_.self->name);
      return false;
    }
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::SelfField;
    n->name = fn;
    n->type = fd->type;
    n->off = p;
    base = std::move(n);
    bt = fd->type;
    cur = lex_ident_end(*src_, fq, limit_);
  } else if (const Ty* lt = env_.lookup(id)) {
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Local;
    n->name = id;
    n->type = *lt;
    n->off = p;
    base = std::move(n);
    bt = *lt;
  } else if (body_.self && !body_.in_static && body_.self->find_field(id)) {
    const FieldDecl* fd = body_.self->find_field(id);
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::SelfField;
    n->name = id;
    n->type = fd->type;
    n->off = p;
    base = std::move(n);
    bt = fd->type;
  } else if (match_tok(*src_, cur, limit_, "(") >= 0) {
    // bare call: free built-in, else static method from the operator scope
    if (auto bs = builtin_free(id, fresh_var())) {
      if (!unify(g.expected, bs->ret, s)) return false;
      std::vector<TE> args;
      int e2;
      if (!parse_args(cur, bs->params, false, g, s, args, &e2, fail))
        return false;
      auto n = std::make_shared<TExpr>();
      n->k = TExpr::K::BareCall;
      n->name = id;
      n->args = std::move(args);
      n->type = bs->ret;
      n->off = p;
      base = std::move(n);
      bt = bs->ret;
      cur = e2;
    } else {
      bool found = false;
      for (const ClassDecl* cls : scope_order_) {
        for (const MethodDecl& m : cls->methods) {
          if (!m.is_static || m.name != id) continue;
          std::map<std::string, Ty> inst;
          for (const TypeParam& tp : m.tparams)
            inst[tp.name] = t_var(fresh_var(), tp.is_name);
          Ty ret = instantiate(m.ret, inst);
          Subst b = s;
          if (!unify(g.expected, ret, b)) continue;
          if (!check_requires(m.requires_classes, inst, g.frames, b)) continue;
          std::vector<Ty> ptypes;
          bool variadic = !m.params.empty() && m.params.back().variadic;
          for (const Param& pr : m.params)
            ptypes.push_back(instantiate(pr.type, inst));
          std::vector<TE> args;
          int e2;
          if (!parse_args(cur, ptypes, variadic, g, b, args, &e2, fail))
            continue;
          auto n = std::make_shared<TExpr>();
          n->k = TExpr::K::BareCall;
          n->name = id;
          n->method = &m;
          n->args = std::move(args);
          n->type = ret;
          n->off = p;
          base = std::move(n);
          bt = ret;
          cur = e2;
          s = std::move(b);
          found = true;
          break;
        }
        if (found) break;
      }
      if (!found) {
        note_fail(fail, p, "a known function");
        return false;
      }
    }
  } else {
    note_fail(fail, p, "a known identifier");
    return false;
  }

  // postfix chain: .field and .method(args)
  for (;;) {
    int d = match_tok(*src_, cur, limit_, ".");
    if (d < 0) break;
    int mq = skip_ws(*src_, d, limit_);
    std::string mn = ident_at(*src_, mq, limit_);
    if (mn.empty()) break;
    int afterm = lex_ident_end(*src_, mq, limit_);
    bool is_call = match_tok(*src_, afterm, limit_, "(") >= 0;
    Ty rbt = s.resolve(bt);
    if (is_call) {
      if (auto sig = builtin_method(rbt, mn, fresh_var())) {
        std::vector<TE> args;
        int e2;
        if (!parse_args(afterm, sig->params, false, g, s, args, &e2, fail))
          return false;
        auto n = std::make_shared<TExpr>();
        n->k = TExpr::K::Call;
        n->base = base;
        n->name = mn;
        n->is_apply = mn == "apply";
        n->args = std::move(args);
        n->type = sig->ret;
        n->off = p;
        base = std::move(n);
        bt = sig->ret;
        cur = e2;
        continue;
      }
      const ClassDecl* cls = rbt->k == TypeT::K::Cls
                                 ? linked_->find_class(rbt->cls)
                                 : nullptr;
      bool done = false;
      if (cls && cls->tparams.size() == rbt->args.size()) {
        std::map<std::string, Ty> inst;
        for (size_t i = 0; i < cls->tparams.size(); ++i)
          inst[cls->tparams[i].name] = rbt->args[i];
        for (const MethodDecl& m : cls->methods) {
          if (m.is_static || m.name != mn) continue;
          std::map<std::string, Ty> minst = inst;
          for (const TypeParam& tp : m.tparams)
            minst[tp.name] = t_var(fresh_var(), tp.is_name);
          Subst b = s;
          if (!check_requires(m.requires_classes, minst, g.frames, b)) continue;
          std::vector<Ty> ptypes;
          bool variadic = !m.params.empty() && m.params.back().variadic;
          for (const Param& pr : m.params)
            ptypes.push_back(instantiate(pr.type, minst));
          std::vector<TE> args;
          int e2;
          if (!parse_args(afterm, ptypes, variadic, g, b, args, &e2, fail))
            continue;
          Ty ret = instantiate(m.ret, minst);
          auto n = std::make_shared<TExpr>();
          n->k = TExpr::K::Call;
          n->base = base;
          n->name = mn;
          n->method = &m;
          n->args = std::move(args);
          n->type = ret;
          n->off = p;
          base = std::move(n);
          bt = ret;
          cur = e2;
          s = std::move(b);
          done = true;
          break;
        }
      }
      if (done) continue;
      note_fail(fail, mq, "a method of " + render_type(rbt));
      return false;
    }
    // field read
    const ClassDecl* cls =
        rbt->k == TypeT::K::Cls ? linked_->find_class(rbt->cls) : nullptr;
    const FieldDecl* fd = cls ? cls->find_field(mn) : nullptr;
    if (!fd || (fd->is_private && body_.self != cls) ||
        cls->tparams.size() != rbt->args.size())
      break;  // the chain ends before the dot
    std::map<std::string, Ty> inst;
    for (size_t i = 0; i < cls->tparams.size(); ++i)
      inst[cls->tparams[i].name] = rbt->args[i];
    Ty ft = instantiate(fd->type, inst);
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::FieldRead;
    n->base = base;
    n->name = mn;
    n->type = ft;
    n->off = p;
    base = std::move(n);
    bt = ft;
    cur = afterm;
  }

  if (!unify(g.expected, bt, s)) {
    note_fail(fail, p,
              "an expression of type " + render_type(s.resolve(g.expected)));
    return false;
  }
  out.push_back({PValue{std::move(base), cur, bt, 1 << 28, true,
                        {1 << 20, 1 << 20, 1 << 20}},
                 std::move(s)});
  return true;
}

std::optional<Ty> Session::parse_type_at(int* pos) const {
  int p = skip_ws(*src_, *pos, limit_);
  std::string id = ident_at(*src_, p, limit_);
  if (id.empty()) return std::nullopt;
  int cur = lex_ident_end(*src_, p, limit_);
  Ty t;
  if (id == "Int") t = t_int();
  else if (id == "Bool") t = t_bool();
  else if (id == "Str") t = t_str();
  else if (id == "Void") t = t_void();
  else if (id == "Unit") t = t_unit();
  if (t) {
    *pos = cur;
    return t;
  }
  if (auto it = body_.tparams.find(id); it != body_.tparams.end()) {
    *pos = cur;
    return it->second;
  }
  std::vector<Ty> args;
  if (int lt = match_tok(*src_, cur, limit_, "<"); lt >= 0) {
    cur = lt;
    for (;;) {
      int c2 = cur;
      auto a = parse_type_at(&c2);
      if (!a) return std::nullopt;
      args.push_back(*a);
      cur = c2;
      if (int cm = match_tok(*src_, cur, limit_, ","); cm >= 0) {
        cur = cm;
        continue;
      }
      int gt = match_tok(*src_, cur, limit_, ">");
      if (gt < 0) return std::nullopt;
      cur = gt;
      break;
    }
  }
  int ba = builtin_class_arity(id);
  if (ba >= 0) {
    if ((int)args.size() != ba) return std::nullopt;
  } else {
    const ClassDecl* cls = linked_->find_class(id);
    if (!cls || cls->tparams.size() != args.size()) return std::nullopt;
  }
  *pos = cur;
  return t_cls(id, std::move(args));
}

// ---- names -------------------------------------------------------------------

ParseOutcome Session::parse_name_occurrence(int pos,
                                            const std::string& name_type,
                                            const NameP& bound, Subst& s,
                                            NameP* out) {
  Goal g;
  g.expected = t_cls(name_type);
  g.min_rank = PriorityOrder::kBottom;
  g.literal_mode = true;
  Subst b = s;
  ParseOutcome r = parse_expr(pos, g, b);
  if (!r.ok) return r;
  NameP tree = to_name(r.v.node);
  if (!tree) {
    ParseOutcome f;
    f.furthest = pos;
    f.expected_toks = {"a name"};
    return f;
  }
  auto mut = std::make_shared<NameAst>(*tree);
  mut->text = src_->substr(pos, r.v.end - pos);
  tree = mut;
  if (bound && !name_ast_equal(tree, bound)) {
    ParseOutcome f;
    f.furthest = pos;
    f.expected_toks = {"the name '" + bound->text + "'"};
    return f;
  }
  s = std::move(b);
  if (out) *out = tree;
  return r;
}

// ---- statements ---------------------------------------------------------------

std::optional<TE> Session::parse_full(int begin, int end, const Goal& goal,
                                      Subst& s, DiagList& diags) {
  int saved = limit_;
  limit_ = end;
  int pos = goal.literal_mode ? begin : skip_ws(*src_, begin, end);
  ParseOutcome r = parse_expr(pos, goal, s);
  if (r.ok) {
    int stop = goal.literal_mode ? r.v.end : skip_ws(*src_, r.v.end, end);
    limit_ = saved;
    if (stop >= end) return r.v.node;
    diags.error(unit_->origin, r.v.end, "unexpected input after expression");
    return std::nullopt;
  }
  limit_ = saved;
  diags.error(unit_->origin, r.furthest, render_expected(r.expected_toks));
  return std::nullopt;
}

namespace {

// Unknown classes and arity mistakes in declared statement types are reported
// here; expression types are checked by unification.
void validate_decl_type(const Ty& t, const LinkedProgram* linked,
                        const std::string& origin, int off, DiagList& diags) {
  if (t->k == TypeT::K::Cls) {
    int ba = builtin_class_arity(t->cls);
    if (ba >= 0) {
      if ((int)t->args.size() != ba)
        diags.error(origin, off, "wrong number of type arguments for '" +
                                     t->cls + "'");
    } else {
      const ClassDecl* c = linked->find_class(t->cls);
      if (!c)
        diags.error(origin, off, "unknown type '" + t->cls + "'");
      else if (c->tparams.size() != t->args.size())
        diags.error(origin, off, "wrong number of type arguments for '" +
                                     t->cls + "'");
    }
    for (const Ty& a : t->args)
      validate_decl_type(a, linked, origin, off, diags);
  } else if (t->k == TypeT::K::Stile) {
    validate_decl_type(t->lhs, linked, origin, off, diags);
    validate_decl_type(t->rhs, linked, origin, off, diags);
  }
}

}  // namespace

bool Session::check_assign(const KStmt& st, TStmt& ts, Subst& s,
                           DiagList& diags) {
  const auto& path = st.target;
  size_t i = 0;
  TE base;
  Ty bt;
  if (path[0] == "this") {
    if (!body_.self || body_.in_static || path.size() < 2) return false;
    i = 1;
  } else if (const Ty* lt = env_.lookup(path[0])) {
    if (path.size() == 1) {
      Goal g{*lt, body_.frames, PriorityOrder::kBottom, false};
      auto e = parse_full(st.rhs.begin, st.rhs.end, g, s, diags);
      ts.assign_local = true;
      ts.name = path[0];
      ts.decl_type = *lt;
      ts.a = e.value_or(nullptr);
      return true;
    }
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::Local;
    n->name = path[0];
    n->type = *lt;
    n->off = st.off;
    base = std::move(n);
    bt = *lt;
    i = 1;
  } else if (body_.self && !body_.in_static &&
             body_.self->find_field(path[0])) {
    // implicit this.<field>...
    if (path.size() == 1) {
      const FieldDecl* fd = body_.self->find_field(path[0]);
      Goal g{fd->type, body_.frames, PriorityOrder::kBottom, false};
      auto e = parse_full(st.rhs.begin, st.rhs.end, g, s, diags);
      ts.assign_field = true;
      ts.name = path[0];
      ts.decl_type = fd->type;
      ts.a = e.value_or(nullptr);
      return true;
    }
    const FieldDecl* fd = body_.self->find_field(path[0]);
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::SelfField;
    n->name = path[0];
    n->type = fd->type;
    n->off = st.off;
    base = std::move(n);
    bt = fd->type;
    i = 1;
  } else {
    return false;
  }

  // this.f = rhs with no intermediate segments
  if (path[0] == "this" && path.size() == 2) {
    const FieldDecl* fd = body_.self->find_field(path[1]);
    if (!fd) return false;
    Goal g{fd->type, body_.frames, PriorityOrder::kBottom, false};
    auto e = parse_full(st.rhs.begin, st.rhs.end, g, s, diags);
    ts.assign_field = true;
    ts.name = path[1];
    ts.decl_type = fd->type;
    ts.a = e.value_or(nullptr);
    return true;
  }

  if (path[0] == "this") {
    const FieldDecl* fd = body_.self->find_field(path[1]);
    if (!fd) return false;
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::SelfField;
    n->name = path[1];
    n->type = fd->type;
    n->off = st.off;
    base = std::move(n);
    bt = fd->type;
    i = 2;
  }

  for (; i + 1 < path.size(); ++i) {
    Ty rbt = s.resolve(bt);
    const ClassDecl* cls =
        rbt->k == TypeT::K::Cls ? linked_->find_class(rbt->cls) : nullptr;
    const FieldDecl* fd = cls ? cls->find_field(path[i]) : nullptr;
    if (!fd || (fd->is_private && body_.self != cls) ||
        cls->tparams.size() != rbt->args.size())
      return false;
    std::map<std::string, Ty> inst;
    for (size_t k = 0; k < cls->tparams.size(); ++k)
      inst[cls->tparams[k].name] = rbt->args[k];
    Ty ft = instantiate(fd->type, inst);
    auto n = std::make_shared<TExpr>();
    n->k = TExpr::K::FieldRead;
    n->base = base;
    n->name = path[i];
    n->type = ft;
    n->off = st.off;
    base = std::move(n);
    bt = ft;
  }
  Ty rbt = s.resolve(bt);
  const ClassDecl* cls =
      rbt->k == TypeT::K::Cls ? linked_->find_class(rbt->cls) : nullptr;
  const FieldDecl* fd = cls ? cls->find_field(path.back()) : nullptr;
  if (!fd || (fd->is_private && body_.self != cls) ||
      cls->tparams.size() != rbt->args.size())
    return false;
  std::map<std::string, Ty> inst;
  for (size_t k = 0; k < cls->tparams.size(); ++k)
    inst[cls->tparams[k].name] = rbt->args[k];
  Ty ft = instantiate(fd->type, inst);
  Goal g{ft, body_.frames, PriorityOrder::kBottom, false};
  auto e = parse_full(st.rhs.begin, st.rhs.end, g, s, diags);
  ts.assign_field = true;
  ts.name = path.back();
  ts.base = base;
  ts.decl_type = ft;
  ts.a = e.value_or(nullptr);
  return true;
}

TBlockP Session::check_block(const KBlock& kb, Subst& s, DiagList& diags) {
  auto out = std::make_shared<TBlock>();
  out->off = kb.begin;
  env_.push();
  for (const KStmt& st : kb.stmts) {
    TStmt ts;
    ts.k = st.k;
    ts.off = st.off;
    switch (st.k) {
      case KStmt::K::Local: {
        DiagList dt;
        validate_decl_type(st.decl_type, linked_, unit_->origin, st.off, dt);
        if (dt.has_error()) {
          // `head name = rhs` also matches operator statements; only a valid
          // declared type commits to declaration semantics
          Subst b = s;
          DiagList d1;
          Goal gv{t_void(), body_.frames, PriorityOrder::kBottom, false};
          auto e = parse_full(st.off, st.init.end, gv, b, d1);
          if (!e) {
            b = s;
            d1 = DiagList{};
            Goal g2{t_var(fresh_var()), body_.frames, PriorityOrder::kBottom,
                    false};
            e = parse_full(st.off, st.init.end, g2, b, d1);
          }
          if (e) {
            s = std::move(b);
            ts.k = KStmt::K::Expr;
            ts.a = *e;
            break;
          }
          diags.append(dt);
        }
        Goal g{st.decl_type, body_.frames, PriorityOrder::kBottom, false};
        auto e = parse_full(st.init.begin, st.init.end, g, s, diags);
        ts.name = st.name;
        ts.decl_type = st.decl_type;
        ts.a = e.value_or(nullptr);
        env_.define(st.name, st.decl_type);
        break;
      }
      case KStmt::K::Expr: {
        if (!st.target.empty() && check_assign(st, ts, s, diags)) break;
        Goal g{t_void(), body_.frames, PriorityOrder::kBottom, false};
        Subst b = s;
        DiagList d1;
        auto e = parse_full(st.span.begin, st.span.end, g, b, d1);
        if (e) {
          s = std::move(b);
          ts.a = *e;
        } else {
          Goal g2{t_var(fresh_var()), body_.frames, PriorityOrder::kBottom,
                  false};
          auto e2 = parse_full(st.span.begin, st.span.end, g2, s, diags);
          ts.a = e2.value_or(nullptr);
        }
        break;
      }
      case KStmt::K::If: {
        Goal g{t_bool(), body_.frames, PriorityOrder::kBottom, false};
        auto c = parse_full(st.cond.begin, st.cond.end, g, s, diags);
        ts.a = c.value_or(nullptr);
        ts.body = check_block(*st.body, s, diags);
        if (st.alt) ts.alt = check_block(*st.alt, s, diags);
        break;
      }
      case KStmt::K::While: {
        Goal g{t_bool(), body_.frames, PriorityOrder::kBottom, false};
        auto c = parse_full(st.cond.begin, st.cond.end, g, s, diags);
        ts.a = c.value_or(nullptr);
        ts.body = check_block(*st.body, s, diags);
        break;
      }
      case KStmt::K::ForEach: {
        validate_decl_type(st.decl_type, linked_, unit_->origin, st.off, diags);
        Goal g{t_cls("List", {st.decl_type}), body_.frames,
               PriorityOrder::kBottom, false};
        auto it = parse_full(st.iter.begin, st.iter.end, g, s, diags);
        ts.name = st.name;
        ts.decl_type = st.decl_type;
        ts.iter = it.value_or(nullptr);
        env_.push();
        env_.define(st.name, st.decl_type);
        ts.body = check_block(*st.body, s, diags);
        env_.pop();
        break;
      }
      case KStmt::K::Return: {
        ts.has_value = st.has_value;
        Ty ret = body_.ret ? body_.ret : t_void();
        if (st.has_value) {
          Goal g{ret, body_.frames, PriorityOrder::kBottom, false};
          auto e = parse_full(st.span.begin, st.span.end, g, s, diags);
          ts.a = e.value_or(nullptr);
        } else if (ret->k != TypeT::K::Prim ||
                   (ret->prim != Prim::Void && ret->prim != Prim::Unit)) {
          diags.error(unit_->origin, st.off, "missing return value");
        }
        break;
      }
      case KStmt::K::TryFinally: {
        ts.body = check_block(*st.body, s, diags);
        ts.alt = check_block(*st.alt, s, diags);
        break;
      }
      case KStmt::K::Block: {
        ts.body = check_block(*st.body, s, diags);
        break;
      }
    }
    out->stmts.push_back(std::move(ts));
  }
  env_.pop();
  return out;
}

}  // namespace ctx
