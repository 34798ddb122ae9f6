#include "ctx/runtime.hpp"

#include <map>
#include <sstream>
#include <string>

#include "ctx/driver.hpp"
#include "doctest.h"

using namespace ctx;

namespace {

struct Ran {
  CompileResult cr;
  RunResult rr;
  std::string out;
  std::string err;
  VirtualFS vfs;
};

Ran run_src(const std::string& text,
            const std::map<std::string, std::vector<std::string>>& files = {},
            const std::map<std::string, std::string>& units = {}) {
  Ran r;
  r.vfs.files = files;
  auto loader = [&units](const std::string& p) -> std::optional<std::string> {
    auto it = units.find(p);
    return it == units.end() ? std::nullopt
                             : std::optional<std::string>(it->second);
  };
  r.cr = compile_source(text, "main.ctx", {""}, loader);
  {
    INFO(r.cr.diags.render());
    REQUIRE(r.cr.ok);
  }
  std::ostringstream o, e;
  r.rr = run_program(r.cr.lowered, r.vfs, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

}  // namespace

TEST_CASE("primitive and collection built-ins evaluate") {
  Ran r = run_src(R"(
main {
  Int a = 4;
  println(a.times(5));
  println(a.lt(5));
  println(a.plus(1).minus(1));
  Str s = "abc";
  println(s.substring(1, 3));
  println(s.length().minus(1));
  println(s.concat("!").length());
  Str ab = "ab";
  println(ab.startsWith("a"));
  Bool bt = true;
  println(bt.and(false));
  println(not(false));
  List<Int> xs = new List<Int>();
  xs.add(2);
  xs.add(3);
  println(xs.get(0));
  println(xs.size().plus(1));
  println(xs);
  Map<Str, Int> m = new Map<Str, Int>();
  m.put("a", 1);
  m.put("b", 2);
  m.put("a", 3);
  println(m);
  println(m.contains("c"));
  println(isNull(m.get("c")));
  println(m.get("a").plus(m.get("b")));
  Optional<Int> o = none();
  println(o.isPresent());
  Optional<Int> so = some(7);
  println(so.get());
}
)");
  CHECK(r.rr.exit_code == 0);
  CHECK(r.err == "");
  CHECK(r.out ==
        "20\n"
        "true\n"
        "4\n"
        "bc\n"
        "2\n"
        "4\n"
        "true\n"
        "false\n"
        "true\n"
        "2\n"
        "3\n"
        "[2, 3]\n"
        "{a: 3, b: 2}\n"
        "false\n"
        "true\n"
        "5\n"
        "false\n"
        "7\n");
}

TEST_CASE("kernel control flow runs") {
  Ran r = run_src(R"(
main {
  Int n = 0;
  while (n.lt(3)) {
    n = n.plus(1);
  }
  println(n);
  if (n.eq(3)) { println("three"); } else { println("other"); }
  List<Str> ws = new List<Str>();
  ws.add("a");
  ws.add("b");
  for (Str w : ws) {
    println(w);
  }
}
)");
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "3\nthree\na\nb\n");
}

TEST_CASE("a bare return ends the program normally") {
  Ran r = run_src(R"(
main {
  println("a");
  return;
  println("b");
}
)");
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "a\n");
}

TEST_CASE("context operands are call-by-name thunks") {
  const char* src = R"(
dsl C {
  static Void "iff" _ "thn" _ "els" _ (Bool c, Lazy |- Void t, Lazy |- Void e) {
    if (c) { t.apply(new Lazy()); } else { e.apply(new Lazy()); }
  }
}
main {
  iff COND thn { Int a = tick(); println("t"); } els { Int b = tick(); println("e"); };
}
)";
  auto run_with = [&](const std::string& cond, const std::string& expect) {
    std::string text = src;
    text.replace(text.find("COND"), 4, cond);
    auto loader = [](const std::string&) -> std::optional<std::string> {
      return std::nullopt;
    };
    CompileResult cr = compile_source(text, "main.ctx", {""}, loader);
    {
      INFO(cr.diags.render());
      REQUIRE(cr.ok);
    }
    VirtualFS vfs;
    std::ostringstream out;
    Machine m;
    m.prog = &cr.lowered;
    m.vfs = &vfs;
    m.out = &out;
    eval(cr.lowered.main_ir, Env::child(nullptr), m);
    // only the taken branch was forced
    CHECK(m.counters["tick"] == 1);
    CHECK(out.str() == expect);
  };
  run_with("true", "t\n");
  run_with("false", "e\n");
}

TEST_CASE("a thunk re-evaluates on every apply") {
  const char* text = R"(
dsl Tw {
  static Void "twice" _ (Lazy |- Int body) {
    Int x = body.apply(new Lazy());
    Int y = body.apply(new Lazy());
    println(x.plus(y));
  }
}
main {
  twice tick();
}
)";
  auto loader = [](const std::string&) -> std::optional<std::string> {
    return std::nullopt;
  };
  CompileResult cr = compile_source(text, "main.ctx", {""}, loader);
  {
    INFO(cr.diags.render());
    REQUIRE(cr.ok);
  }
  VirtualFS vfs;
  std::ostringstream out;
  Machine m;
  m.prog = &cr.lowered;
  m.vfs = &vfs;
  m.out = &out;
  eval(cr.lowered.main_ir, Env::child(nullptr), m);
  CHECK(m.counters["tick"] == 2);
  CHECK(out.str() == "3\n");
}

TEST_CASE("instance operators read the enclosing assumption frame") {
  Ran r = run_src(R"(
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
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "42\n");
}

TEST_CASE("bound names reach values through frame fields") {
  Ran r = run_src(R"(
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
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "41\n");
}

TEST_CASE("required frames are satisfied at call time") {
  Ran r = run_src(R"(
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
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "9\n");
}

TEST_CASE("fun closures are return boundaries") {
  Ran r = run_src(R"(
main {
  Function<Int, Int> f = fun (Int n) : Int {
    if (n.lt(100)) { return 10; }
    return 0;
  };
  println(f.apply(1));
  println(f.apply(100));
}
)");
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "10\n0\n");
}

TEST_CASE("variadic operands collect into a list") {
  Ran r = run_src(R"(
dsl S {
  static Int "sum" _* (Int... xs) {
    Int t = 0;
    for (Int x : xs) { t = t.plus(x); }
    return t;
  }
}
main {
  println(sum 1 2 3);
}
)");
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "6\n");
}

TEST_CASE("object state persists across method calls") {
  Ran r = run_src(R"(
dsl Box {
  private Int n;
  Box(Int start) { this.n = start; }
  Int bump() {
    this.n = this.n.plus(1);
    return this.n;
  }
}
main {
  Box b = new Box(5);
  println(b.bump());
  println(b.bump());
}
)");
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "6\n7\n");
}

TEST_CASE("imported operators run with their own unit's provenance") {
  Ran r = run_src(
      "import dsl Lib;\nmain {\n  println(seven);\n  boomer;\n}\n", {},
      {{"Lib.ctx",
        "dsl Lib {\n"
        "  static Int \"seven\" () { return 7; }\n"
        "  static Void \"boomer\" () { fault(\"lib fault\"); }\n"
        "}\n"}});
  CHECK(r.rr.exit_code == 1);
  CHECK(r.out == "7\n");
  CHECK(r.err.find("fault: lib fault at Lib.ctx:") != std::string::npos);
}

TEST_CASE("faults carry provenance and stop the program") {
  Ran r = run_src(R"(
main {
  println("before");
  fault("boom");
  println("after");
}
)");
  CHECK(r.rr.exit_code == 1);
  CHECK(r.out == "before\n");
  CHECK(r.err.find("fault: boom at main.ctx:") == 0);
}

TEST_CASE("finally runs on both paths") {
  Ran ok = run_src(R"(
main {
  try { println("in"); } finally { println("cleanup"); }
  println("done");
}
)");
  CHECK(ok.rr.exit_code == 0);
  CHECK(ok.out == "in\ncleanup\ndone\n");

  Ran bad = run_src(R"(
main {
  try {
    println("in");
    fault("bad");
  } finally {
    println("cleanup");
  }
  println("unreached");
}
)");
  CHECK(bad.rr.exit_code == 1);
  CHECK(bad.out == "in\ncleanup\n");
  CHECK(bad.err.find("fault: bad at main.ctx:") == 0);
}

TEST_CASE("runtime guards fault instead of crashing") {
  Ran idx = run_src(R"(
main {
  List<Int> xs = new List<Int>();
  xs.add(1);
  println(xs.get(2));
}
)");
  CHECK(idx.rr.exit_code == 1);
  CHECK(idx.err.find("fault: index out of range at main.ctx:") == 0);

  Ran opt = run_src(R"(
main {
  Optional<Int> o = none();
  println(o.get());
}
)");
  CHECK(opt.rr.exit_code == 1);
  CHECK(opt.err.find("fault: empty optional at main.ctx:") == 0);

  Ran sub = run_src(R"(
main {
  Str s = "ab";
  println(s.substring(1, 9));
}
)");
  CHECK(sub.rr.exit_code == 1);
  CHECK(sub.err.find("fault: substring out of range at main.ctx:") == 0);

  Ran nullapp = run_src(R"(
main {
  Function<Int, Int> g = null;
  Int y = g.apply(1);
}
)");
  CHECK(nullapp.rr.exit_code == 1);
  CHECK(nullapp.err.find("fault: apply of null at main.ctx:") == 0);
}

TEST_CASE("file handles read to EOF and close once") {
  Ran r = run_src(R"(
main {
  Closeable f = openFile("data.txt");
  try {
    Str line = f.readLine();
    while (not(isNull(line))) {
      println(line);
      line = f.readLine();
    }
  } finally {
    f.close();
  }
}
)",
                  {{"data.txt", {"one", "two"}}});
  CHECK(r.rr.exit_code == 0);
  CHECK(r.out == "one\ntwo\n");
  REQUIRE(r.vfs.opened.size() == 1);
  CHECK(r.vfs.opened[0]->close_calls == 1);
  CHECK(r.vfs.opened[0]->closed);
}

TEST_CASE("a faulting body still closes its handle exactly once") {
  Ran r = run_src(R"(
main {
  Closeable f = openFile("data.txt");
  try {
    fault("explode");
  } finally {
    f.close();
  }
}
)",
                  {{"data.txt", {"x"}}});
  CHECK(r.rr.exit_code == 1);
  REQUIRE(r.vfs.opened.size() == 1);
  CHECK(r.vfs.opened[0]->close_calls == 1);
}

TEST_CASE("opening a missing file faults with the path") {
  Ran r = run_src(R"(
main {
  Closeable f = openFile("nope.txt");
}
)");
  CHECK(r.rr.exit_code == 1);
  CHECK(r.err.find("fault: no such file: nope.txt at main.ctx:") == 0);
}
