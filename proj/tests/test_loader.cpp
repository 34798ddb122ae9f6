#include "ctx/loader.hpp"

#include <map>

#include "doctest.h"

using namespace ctx;

namespace {

std::shared_ptr<Program> load_ok(const std::string& text) {
  ReadResult r = read_program(text, "test.ctx");
  INFO(r.diags.render());
  REQUIRE(r.program != nullptr);
  REQUIRE_FALSE(r.diags.has_error());
  return r.program;
}

DiagList load_err(const std::string& text) {
  ReadResult r = read_program(text, "test.ctx");
  REQUIRE(r.diags.has_error());
  return r.diags;
}

const char* kEntryDsl = R"(
dsl MapEntryRef<K, V> {
  private Map<K, V> map;
  private K key;

  MapEntryRef(Map<K, V> m, K k) {
    this.map = m;
    this.key = k;
  }

  Unit _ "=" _ (MapEntryRef<K, V> e, V value) {
    this.map.put(this.key, value);
  }

  V _ "?" (MapEntryRef<K, V> e) {
    return this.map.get(this.key);
  }
}
)";

}  // namespace

TEST_CASE("a dsl class with fields, a constructor and instance operators") {
  auto p = load_ok(kEntryDsl);
  REQUIRE(p->classes.size() == 1);
  const ClassDecl& c = *p->classes[0];
  CHECK(c.name == "MapEntryRef");
  CHECK(c.is_dsl);
  REQUIRE(c.tparams.size() == 2);
  CHECK(c.tparams[0].name == "K");
  CHECK_FALSE(c.tparams[0].is_name);
  REQUIRE(c.fields.size() == 2);
  CHECK(c.fields[0].is_private);
  CHECK(render_type(c.fields[0].type) == "Map<K, V>");
  REQUIRE(c.ctors.size() == 1);
  CHECK(c.ctors[0].params.size() == 2);
  REQUIRE(c.ops.size() == 2);
  CHECK_FALSE(c.ops[0].is_static);
  CHECK(c.ops[0].owner == &c);
  CHECK(c.ops[0].decl_idx == 0);
  CHECK(c.ops[1].decl_idx == 1);
  CHECK(render_operator(c.ops[0]) ==
        "Unit _ \"=\" _ (MapEntryRef<K, V> e, V value)");
  CHECK(render_operator(c.ops[1]) == "V _ \"?\" (MapEntryRef<K, V> e)");
}

TEST_CASE("operator bodies keep raw expression spans") {
  auto p = load_ok(kEntryDsl);
  const OpDecl& assign = p->classes[0]->ops[0];
  REQUIRE(assign.body->stmts.size() == 1);
  const KStmt& st = assign.body->stmts[0];
  CHECK(st.k == KStmt::K::Expr);
  CHECK(p->span_text(st.span) == "this.map.put(this.key, value)");
  CHECK(st.target.empty());  // a call, not an assignment
}

TEST_CASE("dotted assignment statements carry a target hint") {
  auto p = load_ok(kEntryDsl);
  const CtorDecl& ct = p->classes[0]->ctors[0];
  REQUIRE(ct.body->stmts.size() == 2);
  const KStmt& st = ct.body->stmts[0];
  CHECK(st.k == KStmt::K::Expr);
  REQUIRE(st.target.size() == 2);
  CHECK(st.target[0] == "this");
  CHECK(st.target[1] == "map");
  CHECK(p->span_text(st.rhs) == "m");
}

TEST_CASE("static, literal, priorities, name parameters and repetition") {
  auto p = load_ok(R"(
dsl W {
  priorities lo, hi { lo < hi }

  static Int [hi] "sum" _* (Int... xs) {
    return 0;
  }

  literal W "a" () {
    return null;
  }

  <id: W> Unit "let" id "=" _ [lo] (Int v) {
    return;
  }
}
)");
  const ClassDecl& c = *p->classes[0];
  REQUIRE(c.priorities.has_value());
  CHECK(c.priorities->names == std::vector<std::string>{"lo", "hi"});
  REQUIRE(c.priorities->constraints.size() == 1);
  CHECK(c.priorities->constraints[0].first == "lo");
  CHECK(c.priorities->constraints[0].second == "hi");
  REQUIRE(c.ops.size() == 3);
  CHECK(c.ops[0].is_static);
  CHECK(c.ops[0].prio == "hi");
  CHECK(c.ops[0].syntax[1].rep == Rep::Star);
  CHECK(c.ops[0].params[0].variadic);
  CHECK(c.ops[1].is_literal);
  CHECK(c.ops[1].is_static);  // literal implies static
  const OpDecl& let = c.ops[2];
  REQUIRE(let.tparams.size() == 1);
  CHECK(let.tparams[0].is_name);
  CHECK(let.tparams[0].name_type == "W");
  REQUIRE(let.syntax.size() == 4);
  CHECK(let.syntax[1].k == SyntaxElem::K::NameOp);
  CHECK(let.syntax[1].text == "id");
  CHECK(let.syntax[3].prio == "lo");
}

TEST_CASE("methods parse with requires and turnstile parameter types") {
  auto p = load_ok(R"(
class U {
  static <R> List<Str> getLines(Closeable f) requires FileRead {
    return new List<Str>();
  }

  static <R> R runIn(FileRead |- R body) {
    return body;
  }
}
)");
  const ClassDecl& c = *p->classes[0];
  CHECK_FALSE(c.is_dsl);
  REQUIRE(c.methods.size() == 2);
  CHECK(c.methods[0].name == "getLines");
  REQUIRE(c.methods[0].requires_classes.size() == 1);
  CHECK(render_type(c.methods[0].requires_classes[0]) == "FileRead");
  CHECK(render_type(c.methods[1].params[0].type) == "FileRead |- R");
}

TEST_CASE("kernel statements: locals, if/else, while, for, try/finally") {
  auto p = load_ok(R"(
main {
  Int n = 3;
  if (n.lt(5)) {
    n = n.plus(1);
  } else println("big");
  while (n.lt(9)) n = n.plus(2);
  for (Str s : lines) println(s);
  try { println("in"); } finally { println("out"); }
  return;
}
)");
  REQUIRE(p->main_block != nullptr);
  const auto& sts = p->main_block->stmts;
  REQUIRE(sts.size() == 6);
  CHECK(sts[0].k == KStmt::K::Local);
  CHECK(render_type(sts[0].decl_type) == "Int");
  CHECK(sts[0].name == "n");
  CHECK(p->span_text(sts[0].init) == "3");
  CHECK(sts[1].k == KStmt::K::If);
  REQUIRE(sts[1].alt != nullptr);  // single else statement becomes a block
  REQUIRE(sts[1].alt->stmts.size() == 1);
  CHECK(sts[2].k == KStmt::K::While);
  REQUIRE(sts[2].body->stmts.size() == 1);
  CHECK(sts[2].body->stmts[0].target == std::vector<std::string>{"n"});
  CHECK(sts[3].k == KStmt::K::ForEach);
  CHECK(sts[3].name == "s");
  CHECK(p->span_text(sts[3].iter) == "lines");
  CHECK(sts[4].k == KStmt::K::TryFinally);
  CHECK(sts[5].k == KStmt::K::Return);
  CHECK_FALSE(sts[5].has_value);
}

TEST_CASE("a local declaration needs type, name and initializer to commit") {
  auto p = load_ok(R"(
main {
  open "f" { x.read(); };
  Map<Str, Int> m = it;
}
)");
  const auto& sts = p->main_block->stmts;
  REQUIRE(sts.size() == 2);
  // `open "f" { ... }` starts with an identifier but is no declaration
  CHECK(sts[0].k == KStmt::K::Expr);
  CHECK(p->span_text(sts[0].span) == "open \"f\" { x.read(); }");
  CHECK(sts[1].k == KStmt::K::Local);
  CHECK(render_type(sts[1].decl_type) == "Map<Str, Int>");
}

TEST_CASE("statement keywords are recognized by their following token") {
  auto p = load_ok(R"(
main {
  if-exists m key { it = 1; };
  try ("f") { println("x"); };
}
)");
  const auto& sts = p->main_block->stmts;
  REQUIRE(sts.size() == 2);
  CHECK(sts[0].k == KStmt::K::Expr);  // user operator, not kernel if
  CHECK(sts[1].k == KStmt::K::Expr);  // user operator, not kernel try
}

TEST_CASE("unbalanced brackets are reported at the opener") {
  DiagList d = load_err("main { f(a; }\n");
  CHECK(d.items[0].message == "unbalanced brackets");
  CHECK(d.items[0].offset == 8);
}

TEST_CASE("imports parse with and without constraint blocks") {
  auto p = load_ok(R"(
import dsl MapUtils;
import dsl Pre { MapUtils.p2 < Pre.add; Pre.add < MapUtils.p3 }
main { println("x"); }
)");
  REQUIRE(p->imports.size() == 2);
  CHECK(p->imports[0].dsl == "MapUtils");
  CHECK(p->imports[0].constraints.empty());
  REQUIRE(p->imports[1].constraints.size() == 2);
  CHECK(p->imports[1].constraints[0].first == "MapUtils.p2");
  CHECK(p->imports[1].constraints[0].second == "Pre.add");
}

TEST_CASE("import constraints must use qualified names") {
  load_err("import dsl P { p1 < P.p2 }\nmain { return; }\n");
}

TEST_CASE("rendering a program round-trips through the reader") {
  for (const char* text :
       {kEntryDsl,
        "import dsl A;\ndsl B { priorities p { } static Int \"z\" () { "
        "return 1; } }\nmain { Int x = 1; if (b) { x = 2; } }\n"}) {
    auto p1 = load_ok(text);
    std::string r1 = render_program(*p1);
    auto p2 = load_ok(r1);
    CHECK(program_digest(*p2) == program_digest(*p1));
    CHECK(render_program(*p2) == r1);
  }
}

TEST_CASE("import resolution loads files transitively") {
  std::map<std::string, std::string> files = {
      {"lib/MapUtils.ctx", "import dsl Pre;\ndsl MapUtils { priorities p1 { } "
                           "}\n"},
      {"lib/Pre.ctx", "dsl Pre { }\n"},
  };
  auto loader = [&](const std::string& path) -> std::optional<std::string> {
    auto it = files.find(path);
    if (it == files.end()) return std::nullopt;
    return it->second;
  };
  auto entry = load_ok("import dsl MapUtils;\nmain { return; }\n");
  LinkResult r = resolve_imports(entry, {"lib"}, loader);
  INFO(r.diags.render());
  REQUIRE(r.linked != nullptr);
  CHECK(r.linked->units.size() == 3);
  CHECK(r.linked->find_class("Pre") != nullptr);
  CHECK(r.linked->find_class("MapUtils")->is_dsl);
  CHECK(r.linked->unit_of(r.linked->find_class("Pre"))->origin ==
        "lib/Pre.ctx");

  // operator scope of the entry: direct imports only, then own classes
  auto scope = r.linked->scope_classes(*entry);
  REQUIRE(scope.size() == 1);
  CHECK(scope[0]->name == "MapUtils");
}

TEST_CASE("importing the same dsl twice is idempotent") {
  std::map<std::string, std::string> files = {{"A.ctx", "dsl A { }\n"}};
  auto loader = [&](const std::string& path) -> std::optional<std::string> {
    auto it = files.find(path);
    return it == files.end() ? std::nullopt
                             : std::optional<std::string>(it->second);
  };
  auto entry = load_ok("import dsl A;\nimport dsl A;\nmain { return; }\n");
  LinkResult r = resolve_imports(entry, {""}, loader);
  REQUIRE(r.linked != nullptr);
  CHECK(r.linked->units.size() == 2);
  CHECK(r.linked->scope_classes(*entry).size() == 1);
}

TEST_CASE("unresolved and non-dsl imports are errors") {
  auto loader = [](const std::string&) -> std::optional<std::string> {
    return std::nullopt;
  };
  auto entry = load_ok("import dsl Nowhere;\nmain { return; }\n");
  LinkResult r = resolve_imports(entry, {""}, loader);
  CHECK(r.linked == nullptr);
  CHECK(r.diags.items[0].message == "unresolved dsl import: Nowhere");

  std::map<std::string, std::string> files = {{"C.ctx", "class C { }\n"}};
  auto loader2 = [&](const std::string& path) -> std::optional<std::string> {
    auto it = files.find(path);
    return it == files.end() ? std::nullopt
                             : std::optional<std::string>(it->second);
  };
  auto entry2 = load_ok("import dsl C;\nmain { return; }\n");
  LinkResult r2 = resolve_imports(entry2, {""}, loader2);
  CHECK(r2.linked == nullptr);
  CHECK(r2.diags.items[0].message == "imported class 'C' is not a dsl");
}

TEST_CASE("a class name defined in two files is an error") {
  std::map<std::string, std::string> files = {
      {"A.ctx", "import dsl B;\ndsl A { }\ndsl Shared { }\n"},
      {"B.ctx", "dsl B { }\ndsl Shared { }\n"},
  };
  auto loader = [&](const std::string& path) -> std::optional<std::string> {
    auto it = files.find(path);
    return it == files.end() ? std::nullopt
                             : std::optional<std::string>(it->second);
  };
  auto entry = load_ok("import dsl A;\nmain { return; }\n");
  LinkResult r = resolve_imports(entry, {""}, loader);
  CHECK(r.linked == nullptr);
  REQUIRE(r.diags.has_error());
}
