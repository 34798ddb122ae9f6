#include "ctx/lower.hpp"

#include <map>
#include <string>

#include "ctx/driver.hpp"
#include "doctest.h"

using namespace ctx;

namespace {

CompileResult compile(const std::string& text,
                      const std::map<std::string, std::string>& files = {}) {
  auto loader = [&files](const std::string& p) -> std::optional<std::string> {
    auto it = files.find(p);
    return it == files.end() ? std::nullopt
                             : std::optional<std::string>(it->second);
  };
  CompileResult r = compile_source(text, "main.ctx", {""}, loader);
  INFO(r.diags.render());
  REQUIRE(r.ok);
  return r;
}

const LoweredClass& cls_of(const CompileResult& r, const std::string& name) {
  const ClassDecl* cd = r.linked->find_class(name);
  REQUIRE(cd != nullptr);
  auto it = r.lowered.classes.find(cd);
  REQUIRE(it != r.lowered.classes.end());
  return it->second;
}

}  // namespace

TEST_CASE("kernel statements lower to sequenced assignments and built-ins") {
  CompileResult r = compile(R"(
main {
  Int x = 41;
  x = x.plus(1);
  println(x);
}
)");
  CHECK(dump_ir(r.lowered.main_ir) ==
        "(seq (let x (lit 41)) (set! x (builtin plus (local x) (lit 1))) "
        "(builtin println (local x)))");
}

TEST_CASE("control flow lowers structurally") {
  CompileResult r = compile(R"(
main {
  List<Int> xs = new List<Int>();
  xs.add(3);
  for (Int x : xs) {
    if (x.lt(4)) { println(x); } else { println("big"); }
  }
  try { println("in"); } finally { println("out"); }
  while (false) { println("never"); }
  return;
}
)");
  CHECK(dump_ir(r.lowered.main_ir) ==
        "(seq (let xs (new List)) (builtin add (local xs) (lit 3)) "
        "(foreach x (local xs) (seq (if (builtin lt (local x) (lit 4)) "
        "(seq (builtin println (local x))) "
        "(seq (builtin println (lit \"big\")))))) "
        "(try-finally (seq (builtin println (lit \"in\"))) "
        "(seq (builtin println (lit \"out\")))) "
        "(while (lit false) (seq (builtin println (lit \"never\")))) "
        "(return))");
}

TEST_CASE("context operands become single-parameter lambdas") {
  CompileResult r = compile(R"(
dsl W<T> {
  private T val;
  W(T v0) { this.val = v0; }
  static <T> Void "scope" _ _ (T seed, W<T> |- Void body) {
    W<T> w = new W<T>(seed);
    body.apply(w);
    return;
  }
  T "cur" () { return this.val; }
}
main {
  scope 42 {
    println(cur);
  };
}
)");
  CHECK(dump_ir(r.lowered.main_ir) ==
        "(seq (call-op W/0 (lit 42) (lam $frame0 "
        "(seq (builtin println (call-op W/1 (local $frame0)))))))");
  const LoweredClass& w = cls_of(r, "W");
  REQUIRE(w.op_bodies.size() == 2);
  CHECK(dump_ir(w.op_bodies[0]) ==
        "(seq (let w (new W/0 (local seed))) (app (local body) (local w)) "
        "(return))");
  CHECK(dump_ir(w.op_bodies[1]) == "(seq (return (field val (local this))))");
  REQUIRE(w.ctor_bodies.size() == 1);
  CHECK(dump_ir(w.ctor_bodies[0]) ==
        "(seq (set-field! val (local this) (local v0)))");
}

TEST_CASE("required frames become hidden trailing arguments") {
  CompileResult r = compile(R"(
dsl R {
  private Int v;
  R(Int v0) { this.v = v0; }
  Int "peek" () { return this.v; }
  static Int "grab" () requires R { return peek; }
  static <X> X "with" _ _ (Int seed, R |- X body) {
    return body.apply(new R(seed));
  }
}
main {
  Int r = with 9 grab;
  println(r);
}
)");
  CHECK(dump_ir(r.lowered.main_ir) ==
        "(seq (let r (call-op R/2 (lit 9) (lam $frame0 "
        "(call-op R/1 (local $frame0))))) (builtin println (local r)))");
  const LoweredClass& rc = cls_of(r, "R");
  // the required frame is read from the member's own hidden parameter
  CHECK(dump_ir(rc.op_bodies[1]) ==
        "(seq (return (call-op R/0 (local $req0))))");
  CHECK(dump_ir(rc.op_bodies[2]) ==
        "(seq (return (app (local body) (new R/0 (local seed)))))");
}

TEST_CASE("fun closures lower separately from context lambdas") {
  CompileResult r = compile(R"(
main {
  Function<Int, Int> inc = fun (Int n) : Int { return n.plus(1); };
  Int y = inc.apply(1);
}
)");
  CHECK(dump_ir(r.lowered.main_ir) ==
        "(seq (let inc (closure (n) (seq (return "
        "(builtin plus (local n) (lit 1)))))) "
        "(let y (app (local inc) (lit 1))))");
}

TEST_CASE("generic names vanish from lowered trees") {
  CompileResult r = compile(R"(
dsl Letter {
  literal Letter "x" () { return null; }
  literal Letter "y" () { return null; }
}
dsl Id {
  literal Id _ _ (Letter l, Id rest) { return null; }
  literal Id _ (Letter l) { return null; }
}
dsl Var<A, n: Id> {
  private A v;
  Var(A v0) { this.v = v0; }
  A n () { return this.v; }
}
dsl Lets {
  static <T, n: Id> Void "let" n "=" _ "in" _ (T val, Var<T, n> |- Void body) {
    body.apply(new Var<T, n>(val));
    return;
  }
}
main {
  let xy = 41 in { println(xy); };
}
)");
  std::string main_ir = dump_ir(r.lowered.main_ir);
  CHECK(main_ir ==
        "(seq (call-op Lets/0 (lit 41) (lam $frame0 "
        "(seq (builtin println (call-op Var/0 (local $frame0)))))))");
  // the bound spelling never reaches the IR
  CHECK(main_ir.find("xy") == std::string::npos);
  CHECK(dump_ir(cls_of(r, "Lets").op_bodies[0]) ==
        "(seq (app (local body) (new Var/0 (local val))) (return))");
}

TEST_CASE("program dumps list classes alphabetically with member headers") {
  CompileResult r = compile(R"(
dsl B { static Int "two" () { return 2; } }
dsl A { static Int "one" () { return 1; } }
main {
  Int x = one;
  Int y = two;
  println(x.plus(y));
}
)");
  std::string d = dump_program(r.lowered);
  size_t a = d.find("class A");
  size_t b = d.find("class B");
  size_t m = d.find("main\n");
  REQUIRE(a != std::string::npos);
  REQUIRE(b != std::string::npos);
  REQUIRE(m != std::string::npos);
  CHECK(a < b);
  CHECK(b < m);
  CHECK(d.find("op 0:") != std::string::npos);
}
