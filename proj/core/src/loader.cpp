#include "ctx/loader.hpp"

#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "ctx/scan.hpp"

namespace ctx {

namespace {

const char* kPrimNames[] = {"Int", "Bool", "Str", "Void", "Unit"};

std::optional<Prim> prim_by_name(const std::string& n) {
  if (n == "Int") return Prim::Int;
  if (n == "Bool") return Prim::Bool;
  if (n == "Str") return Prim::Str;
  if (n == "Void") return Prim::Void;
  if (n == "Unit") return Prim::Unit;
  return std::nullopt;
}

bool is_keyword(const std::string& n) {
  static const std::set<std::string> kw = {
      "import", "dsl",  "class",   "static", "literal",  "priorities",
      "main",   "if",   "else",    "while",  "for",      "return",
      "try",    "finally", "new",  "fun",    "requires", "throws",
      "true",   "false", "null",   "this",   "extends"};
  return kw.count(n) > 0;
}

struct Rd {
  const std::string& s;
  std::string origin;
  int limit;
  DiagList& diags;
  int pos = 0;
  // innermost-last stacks of type parameters in scope
  std::vector<const std::vector<TypeParam>*> tscopes;

  bool fail(int off, const std::string& msg) {
    diags.error(origin, off, msg);
    return false;
  }

  void ws() { pos = skip_ws(s, pos, limit); }

  bool eof() {
    ws();
    return pos >= limit;
  }

  char peek() {
    ws();
    return pos < limit ? s[pos] : '\0';
  }

  std::string peek_ident() {
    ws();
    return ident_at(s, pos, limit);
  }

  bool eat(const std::string& tok) {
    int p = match_tok(s, pos, limit, tok);
    if (p < 0) return false;
    pos = p;
    return true;
  }

  bool expect(const std::string& tok) {
    if (eat(tok)) return true;
    ws();
    return fail(pos, "expected '" + tok + "'");
  }

  std::string take_ident() {
    ws();
    std::string id = ident_at(s, pos, limit);
    pos += (int)id.size();
    return id;
  }

  const TypeParam* find_tparam(const std::string& n) const {
    for (auto it = tscopes.rbegin(); it != tscopes.rend(); ++it)
      for (const auto& tp : **it)
        if (tp.name == n) return &tp;
    return nullptr;
  }

  // ---- types ----
  // Silent on failure when quiet; restores pos.
  Ty parse_type(bool quiet) {
    ws();
    int start = pos;
    std::string w = take_ident();
    if (w.empty()) {
      if (!quiet) fail(start, "expected a type");
      pos = start;
      return nullptr;
    }
    if (auto p = prim_by_name(w)) return t_prim(*p);
    if (const TypeParam* tp = find_tparam(w))
      return t_param(w, tp->is_name);
    std::vector<Ty> args;
    ws();
    if (pos < limit && s[pos] == '<') {
      pos++;
      while (true) {
        Ty a = parse_type(quiet);
        if (!a) {
          pos = start;
          return nullptr;
        }
        args.push_back(a);
        ws();
        if (pos < limit && s[pos] == ',') {
          pos++;
          continue;
        }
        if (pos < limit && s[pos] == '>') {
          pos++;
          break;
        }
        if (!quiet) fail(pos, "expected ',' or '>' in type arguments");
        pos = start;
        return nullptr;
      }
    }
    return t_cls(w, std::move(args));
  }

  // Parameter types may be turnstile-typed: S |- T with S a class type.
  Ty parse_param_type() {
    int start = pos;
    Ty lhs = parse_type(false);
    if (!lhs) return nullptr;
    ws();
    if (pos + 1 < limit && s[pos] == '|' && s[pos + 1] == '-') {
      pos += 2;
      if (lhs->k != TypeT::K::Cls && lhs->k != TypeT::K::Param) {
        fail(start, "turnstile assumption must be a class type");
        return nullptr;
      }
      Ty rhs = parse_type(false);
      if (!rhs) return nullptr;
      ws();
      if (pos + 1 < limit && s[pos] == '|' && s[pos + 1] == '-') {
        fail(pos, "turnstile types do not nest");
        return nullptr;
      }
      return t_stile(lhs, rhs);
    }
    return lhs;
  }

  // ---- balanced spans ----
  RawSpan span_to(const std::string& stops, RawSpan::Ctx ctx, char* stop_char) {
    ws();
    RawSpan sp;
    sp.begin = pos;
    sp.ctx = ctx;
    int open_at = 0;
    int p = scan_to_depth0(s, pos, limit, stops, &open_at);
    if (p < 0) {
      fail(open_at, "unbalanced brackets");
      sp.end = sp.begin;
      if (stop_char) *stop_char = '\0';
      return sp;
    }
    int e = p;
    while (e > sp.begin && (s[e - 1] == ' ' || s[e - 1] == '\t' ||
                            s[e - 1] == '\n' || s[e - 1] == '\r'))
      e--;
    sp.end = e;
    if (stop_char) *stop_char = s[p];
    pos = p;
    return sp;
  }

  // ---- statements ----
  bool parse_kblock(KBlock& out) {
    ws();
    int open = pos;
    if (!expect("{")) return false;
    out.begin = pos;
    if (!parse_stmts_until_close(out)) return false;
    ws();
    if (pos >= limit || s[pos] != '}') return fail(open, "unbalanced '{'");
    out.end = pos;
    pos++;
    return true;
  }

  bool parse_stmts_until_close(KBlock& out) {
    while (true) {
      ws();
      if (pos >= limit || s[pos] == '}') return true;
      if (s[pos] == ';') {  // stray semicolon, e.g. after a trailing block
        pos++;
        continue;
      }
      KStmt st;
      if (!parse_stmt(st)) return false;
      out.stmts.push_back(std::move(st));
    }
  }

  KBlockP stmt_as_block(KStmt&& st) {
    auto b = std::make_unique<KBlock>();
    b->begin = st.off;
    b->end = st.off;
    if (st.k == KStmt::K::Block) return std::move(st.body);
    b->stmts.push_back(std::move(st));
    return b;
  }

  bool parse_sub_stmt(KBlockP& out) {
    KStmt st;
    if (!parse_stmt(st)) return false;
    out = stmt_as_block(std::move(st));
    return true;
  }

  bool kernel_kw_at(const std::string& kw, char next) {
    int save = pos;
    if (!eat(kw)) return false;
    ws();
    bool ok = pos < limit && s[pos] == next;
    pos = save;
    return ok;
  }

  bool parse_stmt(KStmt& st) {
    ws();
    st.off = pos;
    if (pos < limit && s[pos] == '{') {
      st.k = KStmt::K::Block;
      st.body = std::make_unique<KBlock>();
      return parse_kblock(*st.body);
    }
    if (kernel_kw_at("if", '(')) return parse_if(st);
    if (kernel_kw_at("while", '(')) return parse_while(st);
    if (kernel_kw_at("for", '(')) return parse_foreach(st);
    if (peek_ident() == "return") return parse_return(st);
    if (kernel_kw_at("try", '{')) return parse_try(st);
    if (try_local_decl(st)) return true;
    if (diags.has_error()) return false;
    // Expression / assignment statement, ending at the first ';' outside
    // brackets. Balanced { ... } groups are skipped, so operators may take
    // block operands past the first one: `iff c thn { .. } els { .. };` is
    // one span.
    st.k = KStmt::K::Expr;
    int open_at = 0;
    int q = scan_to_depth0(s, pos, limit, ";", &open_at);
    if (q < 0)
      return fail(open_at < limit ? open_at : st.off,
                  open_at < limit ? "unbalanced brackets" : "expected ';'");
    int end = q;
    pos = q + 1;
    while (end > st.off && (s[end - 1] == ' ' || s[end - 1] == '\t' ||
                            s[end - 1] == '\n' || s[end - 1] == '\r'))
      end--;
    st.span = {st.off, end, RawSpan::Ctx::Stmt};
    if (st.span.empty()) return fail(st.off, "empty statement");
    split_assign_hint(st);
    return true;
  }

  bool parse_if(KStmt& st) {
    st.k = KStmt::K::If;
    eat("if");
    if (!expect("(")) return false;
    char stop = 0;
    st.cond = span_to(")", RawSpan::Ctx::Cond, &stop);
    if (stop != ')') return false;
    pos++;
    if (!parse_sub_stmt(st.body)) return false;
    ws();
    if (peek_ident() == "else") {
      eat("else");
      if (!parse_sub_stmt(st.alt)) return false;
    }
    return true;
  }

  bool parse_while(KStmt& st) {
    st.k = KStmt::K::While;
    eat("while");
    if (!expect("(")) return false;
    char stop = 0;
    st.cond = span_to(")", RawSpan::Ctx::Cond, &stop);
    if (stop != ')') return false;
    pos++;
    return parse_sub_stmt(st.body);
  }

  bool parse_foreach(KStmt& st) {
    st.k = KStmt::K::ForEach;
    eat("for");
    if (!expect("(")) return false;
    st.decl_type = parse_type(false);
    if (!st.decl_type) return false;
    st.name = take_ident();
    if (st.name.empty()) return fail(pos, "expected a loop variable name");
    if (!expect(":")) return false;
    char stop = 0;
    st.iter = span_to(")", RawSpan::Ctx::Operand, &stop);
    if (stop != ')') return false;
    pos++;
    return parse_sub_stmt(st.body);
  }

  bool parse_return(KStmt& st) {
    st.k = KStmt::K::Return;
    eat("return");
    ws();
    if (pos < limit && s[pos] == ';') {
      pos++;
      return true;
    }
    char stop = 0;
    st.span = span_to(";", RawSpan::Ctx::Return, &stop);
    if (stop != ';') return fail(st.off, "expected ';' after return value");
    pos++;
    st.has_value = true;
    return true;
  }

  bool parse_try(KStmt& st) {
    st.k = KStmt::K::TryFinally;
    eat("try");
    st.body = std::make_unique<KBlock>();
    if (!parse_kblock(*st.body)) return false;
    if (!expect("finally")) return false;
    st.alt = std::make_unique<KBlock>();
    return parse_kblock(*st.alt);
  }

  // `Type name = expr ;` — committed only when all three pieces line up.
  bool try_local_decl(KStmt& st) {
    int save = pos;
    Ty t = parse_type(true);
    if (!t) return false;
    ws();
    std::string name = ident_at(s, pos, limit);
    if (name.empty() || is_keyword(name)) {
      pos = save;
      return false;
    }
    int after_name = pos + (int)name.size();
    int p = skip_ws(s, after_name, limit);
    if (p >= limit || s[p] != '=') {
      pos = save;
      return false;
    }
    pos = p + 1;
    st.k = KStmt::K::Local;
    st.decl_type = t;
    st.name = name;
    char stop = 0;
    st.init = span_to(";", RawSpan::Ctx::Init, &stop);
    if (stop != ';') return fail(st.off, "expected ';'");
    pos++;
    if (st.init.empty())
      return fail(st.off, "local declaration requires an initializer");
    return true;
  }

  // Fills target/rhs when the span looks like `path.to.x = rest`; the checker
  // falls back to the whole span when the path does not resolve.
  void split_assign_hint(KStmt& st) {
    int p = st.span.begin;
    std::vector<std::string> path;
    while (true) {
      p = skip_ws(s, p, st.span.end);
      std::string id = ident_at(s, p, st.span.end);
      if (id.empty()) return;
      path.push_back(id);
      p = skip_ws(s, p + (int)id.size(), st.span.end);
      if (p < st.span.end && s[p] == '.') {
        p++;
        continue;
      }
      break;
    }
    if (p >= st.span.end || s[p] != '=') return;
    p++;
    p = skip_ws(s, p, st.span.end);
    if (p >= st.span.end) return;
    st.target = std::move(path);
    st.rhs = {p, st.span.end, RawSpan::Ctx::Init};
  }

  // ---- declarations ----

  bool parse_tparams(std::vector<TypeParam>& out) {
    if (!eat("<")) return true;
    while (true) {
      TypeParam tp;
      tp.name = take_ident();
      if (tp.name.empty()) return fail(pos, "expected a type parameter name");
      ws();
      if (pos < limit && s[pos] == ':') {
        pos++;
        tp.is_name = true;
        tp.name_type = take_ident();
        if (tp.name_type.empty())
          return fail(pos, "expected a name type after ':'");
      } else if (peek_ident() == "extends") {
        eat("extends");
        tp.bound = take_ident();
        if (tp.bound.empty()) return fail(pos, "expected a bound after 'extends'");
      }
      out.push_back(std::move(tp));
      ws();
      if (pos < limit && s[pos] == ',') {
        pos++;
        continue;
      }
      if (pos < limit && s[pos] == '>') {
        pos++;
        return true;
      }
      return fail(pos, "expected ',' or '>' in type parameters");
    }
  }

  bool parse_qname(std::string& out) {
    std::string a = take_ident();
    if (a.empty()) return fail(pos, "expected a priority name");
    ws();
    if (pos < limit && s[pos] == '.') {
      pos++;
      std::string b = take_ident();
      if (b.empty()) return fail(pos, "expected a name after '.'");
      out = a + "." + b;
    } else {
      out = a;
    }
    return true;
  }

  // `a < b < c; d < e` — each chain contributes adjacent pairs.
  bool parse_constraint_chains(
      std::vector<std::pair<std::string, std::string>>& out,
      const std::string& terminator) {
    while (true) {
      ws();
      if (eat(terminator)) return true;
      std::string prev;
      if (!parse_qname(prev)) return false;
      ws();
      while (pos < limit && s[pos] == '<') {
        pos++;
        std::string next;
        if (!parse_qname(next)) return false;
        out.emplace_back(prev, next);
        prev = std::move(next);
        ws();
      }
      ws();
      if (pos < limit && s[pos] == ';') pos++;
    }
  }

  bool parse_priorities(ClassDecl& c) {
    if (c.priorities)
      return fail(pos, "duplicate priorities declaration");
    eat("priorities");
    PriorityDecl pd;
    while (true) {
      std::string n = take_ident();
      if (n.empty()) return fail(pos, "expected a priority name");
      for (const auto& seen : pd.names)
        if (seen == n) return fail(pos, "duplicate priority name '" + n + "'");
      pd.names.push_back(n);
      ws();
      if (pos < limit && s[pos] == ',') {
        pos++;
        continue;
      }
      break;
    }
    if (!expect("{")) return false;
    if (!parse_constraint_chains(pd.constraints, "}")) return false;
    c.priorities = std::move(pd);
    return true;
  }

  bool parse_params(std::vector<Param>& out) {
    if (!expect("(")) return false;
    ws();
    if (pos < limit && s[pos] == ')') {
      pos++;
      return true;
    }
    while (true) {
      Param p;
      p.type = parse_param_type();
      if (!p.type) return false;
      ws();
      if (pos + 2 < limit && s.compare(pos, 3, "...") == 0) {
        pos += 3;
        p.variadic = true;
      }
      p.name = take_ident();
      if (p.name.empty()) return fail(pos, "expected a parameter name");
      out.push_back(std::move(p));
      ws();
      if (pos < limit && s[pos] == ',') {
        pos++;
        continue;
      }
      if (pos < limit && s[pos] == ')') {
        pos++;
        return true;
      }
      return fail(pos, "expected ',' or ')' in parameters");
    }
  }

  bool parse_requires(std::vector<Ty>& out) {
    if (peek_ident() != "requires") return true;
    eat("requires");
    while (true) {
      Ty t = parse_type(false);
      if (!t) return false;
      if (t->k != TypeT::K::Cls)
        return fail(pos, "requires clause expects class types");
      out.push_back(t);
      ws();
      if (pos < limit && s[pos] == ',') {
        pos++;
        continue;
      }
      return true;
    }
  }

  void skip_throws() {
    if (peek_ident() != "throws") return;
    eat("throws");
    while (true) {
      take_ident();
      ws();
      if (pos < limit && s[pos] == ',') {
        pos++;
        continue;
      }
      break;
    }
  }

  bool is_name_tparam(const std::string& n) const {
    const TypeParam* tp = find_tparam(n);
    return tp && tp->is_name;
  }

  bool parse_syntax_elems(std::vector<SyntaxElem>& out) {
    while (true) {
      ws();
      if (pos >= limit) return fail(pos, "unterminated operator syntax");
      char c = s[pos];
      if (c == '(') return true;
      SyntaxElem e;
      if (c == '"') {
        std::string text;
        int p = lex_str_lit(s, pos, limit, &text);
        if (p < 0) return fail(pos, "bad name part literal");
        if (text.empty()) return fail(pos, "empty name part");
        pos = p;
        e.k = SyntaxElem::K::Part;
        e.text = std::move(text);
      } else if (c == '_') {
        pos++;
        e.k = SyntaxElem::K::Operand;
        if (pos < limit && s[pos] == '*') {
          e.rep = Rep::Star;
          pos++;
        } else if (pos < limit && s[pos] == '+') {
          e.rep = Rep::Plus;
          pos++;
        }
        ws();
        if (pos < limit && s[pos] == '[') {
          pos++;
          if (!parse_qname(e.prio)) return false;
          if (!expect("]")) return false;
        }
      } else if (is_ident_start(c)) {
        std::string n = peek_ident();
        if (!is_name_tparam(n))
          return fail(pos, "'" + n + "' is not a NAME-kind type parameter");
        take_ident();
        e.k = SyntaxElem::K::NameOp;
        e.text = n;
      } else {
        return fail(pos, "expected a syntax element or '('");
      }
      out.push_back(std::move(e));
    }
  }

  bool validate_operator(const OpDecl& op, int off) {
    if (op.syntax.empty()) return fail(off, "operator has empty syntax");
    int operands = 0, reps = 0, rep_operand_idx = -1;
    for (const auto& e : op.syntax) {
      if (e.k == SyntaxElem::K::Operand) {
        if (e.rep != Rep::One) {
          reps++;
          rep_operand_idx = operands;
        }
        operands++;
      }
    }
    if (operands != (int)op.params.size())
      return fail(off, "operand count does not match parameter count");
    if (reps > 1) return fail(off, "at most one repeated operand is allowed");
    int variadics = 0;
    for (const auto& p : op.params)
      if (p.variadic) variadics++;
    if (variadics != reps)
      return fail(off, "repeated operands require exactly one variadic parameter");
    if (reps == 1) {
      if (!op.params.back().variadic || rep_operand_idx != (int)op.params.size() - 1)
        return fail(off, "the variadic parameter must be last and match the repeated operand");
    }
    if (op.is_literal) {
      for (const auto& e : op.syntax)
        if (e.k == SyntaxElem::K::NameOp)
          return fail(off, "literal operators cannot bind generic names");
    }
    for (const auto& e : op.syntax)
      if (e.k == SyntaxElem::K::NameOp && !is_name_tparam(e.text))
        return fail(off, "unknown name operand '" + e.text + "'");
    return true;
  }

  bool parse_member(ClassDecl& c) {
    ws();
    int off = pos;
    std::string w = peek_ident();
    if (w == "priorities") return parse_priorities(c);
    bool is_private = false;
    if (w == "private") {
      eat("private");
      is_private = true;
      w = peek_ident();
    }
    // constructor: the class name followed by '('
    if (!is_private && w == c.name) {
      int save = pos;
      take_ident();
      ws();
      if (pos < limit && s[pos] == '(') {
        CtorDecl ct;
        ct.off = off;
        if (!parse_params(ct.params)) return false;
        skip_throws();
        ct.body = std::make_unique<KBlock>();
        if (!parse_kblock(*ct.body)) return false;
        c.ctors.push_back(std::move(ct));
        return true;
      }
      pos = save;
    }
    bool is_static = false, is_literal = false;
    while (true) {
      w = peek_ident();
      if (w == "static" && !is_static) {
        eat("static");
        is_static = true;
      } else if (w == "literal" && !is_literal) {
        eat("literal");
        is_literal = true;
      } else {
        break;
      }
    }
    std::vector<TypeParam> tps;
    ws();
    if (pos < limit && s[pos] == '<') {
      if (!parse_tparams(tps)) return false;
    }
    tscopes.push_back(&tps);
    bool ok = parse_member_tail(c, off, is_private, is_static, is_literal,
                                tps);
    tscopes.pop_back();
    return ok;
  }

  bool parse_member_tail(ClassDecl& c, int off, bool is_private,
                         bool is_static, bool is_literal,
                         std::vector<TypeParam>& tps) {
    Ty ret = parse_type(false);
    if (!ret) return false;
    std::string prio;
    ws();
    if (pos < limit && s[pos] == '[') {
      pos++;
      if (!parse_qname(prio)) return false;
      if (!expect("]")) return false;
    }
    ws();
    char ch = pos < limit ? s[pos] : '\0';
    bool is_op = ch == '"' || ch == '_';
    std::string first_ident;
    if (!is_op && is_ident_start(ch)) {
      first_ident = peek_ident();
      if (is_name_tparam(first_ident)) is_op = true;
    }
    if (is_op) {
      OpDecl op;
      op.off = off;
      op.is_static = is_static || is_literal;  // literal implies static
      op.is_literal = is_literal;
      op.prio = prio;
      op.ret = ret;
      if (!parse_syntax_elems(op.syntax)) return false;
      if (!parse_params(op.params)) return false;
      if (!parse_requires(op.requires_classes)) return false;
      skip_throws();
      op.body = std::make_unique<KBlock>();
      if (!parse_kblock(*op.body)) return false;
      if (!validate_operator(op, off)) return false;
      if (is_private) return fail(off, "operators cannot be private");
      op.tparams = std::move(tps);  // after parsing: tscopes points into tps
      c.ops.push_back(std::move(op));
      return true;
    }
    if (first_ident.empty()) return fail(pos, "expected a member name");
    if (!prio.empty())
      return fail(off, "priorities apply to operators only");
    int save = pos;
    take_ident();
    ws();
    if (pos < limit && s[pos] == '(') {
      MethodDecl m;
      m.off = off;
      m.is_static = is_static;
      m.name = first_ident;
      m.ret = ret;
      if (!parse_params(m.params)) return false;
      if (!parse_requires(m.requires_classes)) return false;
      skip_throws();
      m.body = std::make_unique<KBlock>();
      if (!parse_kblock(*m.body)) return false;
      if (is_private) return fail(off, "methods cannot be private");
      m.tparams = std::move(tps);
      c.methods.push_back(std::move(m));
      return true;
    }
    pos = save;
    // field
    if (!tps.empty()) return fail(off, "fields cannot declare type parameters");
    if (is_static || is_literal) return fail(off, "fields cannot be static");
    FieldDecl f;
    f.off = off;
    f.is_private = is_private;
    f.type = ret;
    f.name = take_ident();
    if (f.name.empty()) return fail(pos, "expected a field name");
    if (!expect(";")) return false;
    c.fields.push_back(std::move(f));
    return true;
  }

  bool parse_class(Program& prog, bool is_dsl) {
    auto c = std::make_unique<ClassDecl>();
    c->off = pos;
    eat(is_dsl ? "dsl" : "class");
    c->is_dsl = is_dsl;
    c->name = take_ident();
    if (c->name.empty()) return fail(pos, "expected a class name");
    ws();
    if (pos < limit && s[pos] == '<') {
      if (!parse_tparams(c->tparams)) return false;
    }
    tscopes.push_back(&c->tparams);
    bool ok = expect("{");
    while (ok) {
      ws();
      if (pos < limit && s[pos] == '}') {
        pos++;
        break;
      }
      if (pos >= limit) {
        ok = fail(c->off, "unterminated class body");
        break;
      }
      ok = parse_member(*c);
    }
    tscopes.pop_back();
    if (!ok) return false;
    // backpatch declaration order and owner
    for (size_t i = 0; i < c->ops.size(); i++) {
      c->ops[i].owner = c.get();
      c->ops[i].decl_idx = (int)i;
    }
    for (size_t i = 0; i < c->methods.size(); i++) {
      c->methods[i].owner = c.get();
      c->methods[i].decl_idx = (int)i;
    }
    prog.classes.push_back(std::move(c));
    return true;
  }

  bool parse_import(Program& prog) {
    ImportDecl im;
    im.off = pos;
    eat("import");
    if (!expect("dsl")) return false;
    im.dsl = take_ident();
    if (im.dsl.empty()) return fail(pos, "expected a DSL name");
    ws();
    if (pos < limit && s[pos] == '{') {
      pos++;
      if (!parse_constraint_chains(im.constraints, "}")) return false;
      for (const auto& [lo, hi] : im.constraints)
        if (lo.find('.') == std::string::npos ||
            hi.find('.') == std::string::npos)
          return fail(im.off,
                      "import constraints must use qualified priority names");
      ws();
      if (pos < limit && s[pos] == ';') pos++;
    } else {
      if (!expect(";")) return false;
    }
    prog.imports.push_back(std::move(im));
    return true;
  }

  bool parse_main(Program& prog) {
    if (prog.main_block) return fail(pos, "duplicate main block");
    prog.main_off = pos;
    eat("main");
    prog.main_block = std::make_unique<KBlock>();
    return parse_kblock(*prog.main_block);
  }
};

}  // namespace

ReadResult read_program(const std::string& text, const std::string& origin) {
  ReadResult r;
  auto prog = std::make_shared<Program>();
  prog->origin = origin;
  prog->src = std::make_shared<const std::string>(text);
  Rd rd{*prog->src, origin, (int)text.size(), r.diags};
  while (!rd.eof()) {
    std::string w = rd.peek_ident();
    bool ok;
    if (w == "import") ok = rd.parse_import(*prog);
    else if (w == "dsl") ok = rd.parse_class(*prog, true);
    else if (w == "class") ok = rd.parse_class(*prog, false);
    else if (w == "main") ok = rd.parse_main(*prog);
    else {
      rd.fail(rd.pos, "expected import, dsl, class, or main");
      ok = false;
    }
    if (!ok) {
      r.diags.sort_by_offset();
      return r;
    }
  }
  r.program = std::move(prog);
  return r;
}

bool read_stmts(const std::string& src, const std::string& origin, int pos,
                int limit, KBlock& out, DiagList& diags) {
  Rd rd{src, origin, limit, diags};
  rd.pos = pos;
  out.begin = pos;
  if (!rd.parse_stmts_until_close(out)) return false;
  out.end = rd.pos;
  return !diags.has_error();
}

// ---- rendering -------------------------------------------------------------

namespace {

struct Renderer {
  const Program& p;
  std::ostringstream os;
  int indent = 0;

  void nl() {
    os << "\n";
    for (int i = 0; i < indent; i++) os << "  ";
  }

  void render_block(const KBlock& b) {
    os << "{";
    indent++;
    for (const auto& st : b.stmts) {
      nl();
      render_stmt(st);
    }
    indent--;
    nl();
    os << "}";
  }

  void render_stmt(const KStmt& st) {
    switch (st.k) {
      case KStmt::K::Local:
        os << render_type(st.decl_type) << " " << st.name << " = "
           << p.span_text(st.init) << ";";
        break;
      case KStmt::K::Expr:
        os << p.span_text(st.span) << ";";
        break;
      case KStmt::K::If:
        os << "if (" << p.span_text(st.cond) << ") ";
        render_block(*st.body);
        if (st.alt) {
          os << " else ";
          render_block(*st.alt);
        }
        break;
      case KStmt::K::While:
        os << "while (" << p.span_text(st.cond) << ") ";
        render_block(*st.body);
        break;
      case KStmt::K::ForEach:
        os << "for (" << render_type(st.decl_type) << " " << st.name << " : "
           << p.span_text(st.iter) << ") ";
        render_block(*st.body);
        break;
      case KStmt::K::Return:
        if (st.has_value) os << "return " << p.span_text(st.span) << ";";
        else os << "return;";
        break;
      case KStmt::K::TryFinally:
        os << "try ";
        render_block(*st.body);
        os << " finally ";
        render_block(*st.alt);
        break;
      case KStmt::K::Block:
        render_block(*st.body);
        break;
    }
  }

  void render_tparams(const std::vector<TypeParam>& tps) {
    if (tps.empty()) return;
    os << "<";
    for (size_t i = 0; i < tps.size(); i++) {
      if (i) os << ", ";
      os << tps[i].name;
      if (tps[i].is_name) os << ": " << tps[i].name_type;
      else if (!tps[i].bound.empty()) os << " extends " << tps[i].bound;
    }
    os << ">";
  }

  void render_class(const ClassDecl& c) {
    os << (c.is_dsl ? "dsl " : "class ") << c.name;
    render_tparams(c.tparams);
    os << " {";
    indent++;
    if (c.priorities) {
      nl();
      os << "priorities ";
      for (size_t i = 0; i < c.priorities->names.size(); i++) {
        if (i) os << ", ";
        os << c.priorities->names[i];
      }
      os << " { ";
      for (size_t i = 0; i < c.priorities->constraints.size(); i++) {
        if (i) os << " ";
        os << c.priorities->constraints[i].first << " < "
           << c.priorities->constraints[i].second << ";";
      }
      os << " }";
    }
    for (const auto& op : c.ops) {
      nl();
      os << render_operator(op) << " ";
      render_block(*op.body);
    }
    for (const auto& m : c.methods) {
      nl();
      if (m.is_static) os << "static ";
      render_tparams(m.tparams);
      if (!m.tparams.empty()) os << " ";
      os << render_type(m.ret) << " " << m.name << "(";
      for (size_t i = 0; i < m.params.size(); i++) {
        if (i) os << ", ";
        os << render_type(m.params[i].type);
        if (m.params[i].variadic) os << "...";
        os << " " << m.params[i].name;
      }
      os << ")";
      if (!m.requires_classes.empty()) {
        os << " requires ";
        for (size_t i = 0; i < m.requires_classes.size(); i++) {
          if (i) os << ", ";
          os << render_type(m.requires_classes[i]);
        }
      }
      os << " ";
      render_block(*m.body);
    }
    for (const auto& ct : c.ctors) {
      nl();
      os << c.name << "(";
      for (size_t i = 0; i < ct.params.size(); i++) {
        if (i) os << ", ";
        os << render_type(ct.params[i].type) << " " << ct.params[i].name;
      }
      os << ") ";
      render_block(*ct.body);
    }
    for (const auto& f : c.fields) {
      nl();
      if (f.is_private) os << "private ";
      os << render_type(f.type) << " " << f.name << ";";
    }
    indent--;
    nl();
    os << "}";
  }
};

}  // namespace

std::string render_program(const Program& p) {
  Renderer r{p};
  for (const auto& im : p.imports) {
    r.os << "import dsl " << im.dsl;
    if (!im.constraints.empty()) {
      r.os << " { ";
      for (size_t i = 0; i < im.constraints.size(); i++) {
        if (i) r.os << " ";
        r.os << im.constraints[i].first << " < " << im.constraints[i].second
             << ";";
      }
      r.os << " }";
    } else {
      r.os << ";";
    }
    r.os << "\n";
  }
  for (const auto& c : p.classes) {
    r.render_class(*c);
    r.os << "\n";
  }
  if (p.main_block) {
    r.os << "main ";
    r.render_block(*p.main_block);
    r.os << "\n";
  }
  return r.os.str();
}

std::string program_digest(const Program& p) { return render_program(p); }

// ---- linking ---------------------------------------------------------------

FileLoader fs_loader() {
  return [](const std::string& path) -> std::optional<std::string> {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
}

const ClassDecl* LinkedProgram::find_class(const std::string& name) const {
  for (const auto& u : units)
    for (const auto& c : u->classes)
      if (c->name == name) return c.get();
  return nullptr;
}

const Program* LinkedProgram::unit_of(const ClassDecl* c) const {
  for (const auto& u : units)
    for (const auto& uc : u->classes)
      if (uc.get() == c) return u.get();
  return nullptr;
}

std::vector<const ClassDecl*> LinkedProgram::all_classes() const {
  std::vector<const ClassDecl*> out;
  for (const auto& u : units)
    for (const auto& c : u->classes) out.push_back(c.get());
  return out;
}

std::vector<const ClassDecl*> LinkedProgram::scope_classes(
    const Program& unit) const {
  std::vector<const ClassDecl*> out;
  std::set<std::string> seen;
  for (const auto& im : unit.imports) {
    if (seen.count(im.dsl)) continue;  // duplicate import is idempotent
    seen.insert(im.dsl);
    if (const ClassDecl* c = find_class(im.dsl)) out.push_back(c);
  }
  for (const auto& c : unit.classes) {
    if (seen.count(c->name)) continue;
    seen.insert(c->name);
    out.push_back(c.get());
  }
  return out;
}

LinkResult resolve_imports(std::shared_ptr<Program> entry,
                           const std::vector<std::string>& search_paths,
                           const FileLoader& loader) {
  LinkResult r;
  auto linked = std::make_shared<LinkedProgram>();
  linked->entry = entry;
  linked->units.push_back(entry);

  std::map<std::string, std::string> class_file;  // class -> defining origin
  auto register_unit = [&](const std::shared_ptr<Program>& u) {
    for (const auto& c : u->classes) {
      auto [it, fresh] = class_file.emplace(c->name, u->origin);
      if (!fresh)
        r.diags.error(u->origin, c->off,
                      "class '" + c->name + "' already defined in " +
                          it->second);
    }
  };
  register_unit(entry);

  struct Want {
    std::string name;
    std::string from;
    int off;
  };
  std::deque<Want> queue;
  for (const auto& im : entry->imports)
    queue.push_back({im.dsl, entry->origin, im.off});

  while (!queue.empty() && !r.diags.has_error()) {
    auto [name, from, off] = queue.front();
    queue.pop_front();
    if (class_file.count(name)) continue;
    bool found = false;
    for (const auto& dir : search_paths) {
      std::string path = dir.empty() ? name + ".ctx" : dir + "/" + name + ".ctx";
      auto text = loader(path);
      if (!text) continue;
      ReadResult rr = read_program(*text, path);
      r.diags.append(rr.diags);
      if (!rr.program) return r;
      bool defines = false;
      for (const auto& c : rr.program->classes)
        if (c->name == name) defines = true;
      if (!defines) {
        r.diags.error(path, 0, "file does not define class '" + name + "'");
        return r;
      }
      register_unit(rr.program);
      linked->units.push_back(rr.program);
      for (const auto& im : rr.program->imports)
        queue.push_back({im.dsl, rr.program->origin, im.off});
      found = true;
      break;
    }
    if (!found) r.diags.error(from, off, "unresolved dsl import: " + name);
  }
  if (r.diags.has_error()) return r;

  // every import target must exist and be a dsl class
  for (const auto& u : linked->units) {
    for (const auto& im : u->imports) {
      const ClassDecl* c = linked->find_class(im.dsl);
      if (!c) {
        r.diags.error(u->origin, im.off, "unresolved dsl import: " + im.dsl);
      } else if (!c->is_dsl) {
        r.diags.error(u->origin, im.off,
                      "imported class '" + im.dsl + "' is not a dsl");
      }
    }
  }
  if (r.diags.has_error()) return r;
  r.linked = linked;
  return r;
}

}  // namespace ctx
