#include "ctx/types.hpp"

#include "doctest.h"

using namespace ctx;

namespace {

std::shared_ptr<Program> load(const std::string& text) {
  ReadResult r = read_program(text, "types.ctx");
  INFO(r.diags.render());
  REQUIRE(r.program != nullptr);
  return r.program;
}

std::vector<const ClassDecl*> classes_of(const Program& p) {
  std::vector<const ClassDecl*> out;
  for (const auto& c : p.classes) out.push_back(c.get());
  return out;
}

}  // namespace

TEST_CASE("unification binds variables of a generic class pairwise") {
  Subst s;
  Ty pattern = t_cls("Map", {t_var(0), t_var(1)});
  REQUIRE(unify(pattern, t_cls("Map", {t_str(), t_int()}), s));
  CHECK(render_type(s.resolve(t_var(0))) == "Str");
  CHECK(render_type(s.resolve(t_var(1))) == "Int");
  CHECK(render_type(s.resolve(pattern)) == "Map<Str, Int>");
  // idempotent: unifying again changes nothing
  REQUIRE(unify(pattern, t_cls("Map", {t_str(), t_int()}), s));
  CHECK(s.m.size() == 2);
}

TEST_CASE("unification fails on different heads, arity or primitives") {
  Subst s;
  CHECK_FALSE(unify(t_int(), t_str(), s));
  CHECK_FALSE(unify(t_cls("Map", {t_int(), t_int()}), t_cls("List", {t_int()}), s));
  CHECK_FALSE(unify(t_cls("A"), t_cls("A", {t_int()}), s));
  CHECK_FALSE(unify(t_stile(t_cls("S"), t_int()), t_int(), s));
  CHECK(unify(t_stile(t_cls("S"), t_var(0)), t_stile(t_cls("S"), t_int()), s));
  CHECK(render_type(s.resolve(t_var(0))) == "Int");
}

TEST_CASE("variables alias and the occurs check rejects infinite types") {
  Subst s;
  REQUIRE(unify(t_var(0), t_var(1), s));
  REQUIRE(unify(t_var(1), t_int(), s));
  CHECK(render_type(s.resolve(t_var(0))) == "Int");
  Subst s2;
  CHECK_FALSE(unify(t_var(0), t_cls("List", {t_var(0)}), s2));
}

TEST_CASE("rigid parameters unify only with themselves") {
  Subst s;
  CHECK(unify(t_param("K"), t_param("K"), s));
  CHECK_FALSE(unify(t_param("K"), t_param("V"), s));
  CHECK_FALSE(unify(t_param("K"), t_int(), s));
  CHECK(unify(t_var(0), t_param("K"), s));  // vars may bind rigids
  CHECK(render_type(s.resolve(t_var(0))) == "K");
}

TEST_CASE("name-kind variables bind only name-kind terms") {
  auto leaf = std::make_shared<NameAst>();
  static OpDecl dummy;
  leaf->op = &dummy;
  Subst s;
  CHECK_FALSE(unify(t_var(0, true), t_int(), s));
  CHECK_FALSE(unify(t_var(1), t_name(leaf), s));  // type var vs name term
  CHECK(unify(t_var(2, true), t_name(leaf), s));
  CHECK(unify(t_var(3, true), t_param("id", true), s));
  CHECK_FALSE(unify(t_var(4, true), t_param("K", false), s));
  CHECK_FALSE(unify(t_var(5, true), t_var(6, false), s));
}

TEST_CASE("equal name trees unify, different ones do not") {
  static OpDecl op_a, op_b;
  auto mk = [](OpDecl* op) {
    auto n = std::make_shared<NameAst>();
    n->op = op;
    return n;
  };
  Subst s;
  CHECK(unify(t_name(mk(&op_a)), t_name(mk(&op_a)), s));
  CHECK_FALSE(unify(t_name(mk(&op_a)), t_name(mk(&op_b)), s));
}

TEST_CASE("null inhabits classes, Str and rigid type parameters") {
  CHECK(null_fits(t_cls("Map", {t_str(), t_int()})));
  CHECK(null_fits(t_str()));
  CHECK(null_fits(t_param("K")));
  CHECK_FALSE(null_fits(t_int()));
  CHECK_FALSE(null_fits(t_bool()));
  CHECK_FALSE(null_fits(t_unit()));
  CHECK_FALSE(null_fits(t_var(0)));  // unresolved: no inference from null
  CHECK_FALSE(null_fits(t_param("id", true)));
}

TEST_CASE("built-in class arities") {
  CHECK(builtin_class_arity("List") == 1);
  CHECK(builtin_class_arity("Map") == 2);
  CHECK(builtin_class_arity("Lazy") == 0);  // frame class for delayed bodies
  CHECK(builtin_class_arity("Optional") == 1);
  CHECK(builtin_class_arity("Function") == 2);
  CHECK(builtin_class_arity("Closeable") == 0);
  CHECK(builtin_class_arity("Str") == -1);
  CHECK_FALSE(is_builtin_class("MapUtils"));
}

TEST_CASE("built-in methods instantiate against the receiver") {
  Ty m = t_cls("Map", {t_str(), t_int()});
  auto get = builtin_method(m, "get", 0);
  REQUIRE(get.has_value());
  REQUIRE(get->params.size() == 1);
  CHECK(render_type(get->params[0]) == "Str");
  CHECK(render_type(get->ret) == "Int");
  auto put = builtin_method(m, "put", 0);
  REQUIRE(put.has_value());
  CHECK(put->params.size() == 2);
  CHECK(render_type(put->ret) == "Unit");
  CHECK_FALSE(builtin_method(m, "push", 0).has_value());

  CHECK(render_type(builtin_method(t_int(), "plus", 0)->ret) == "Int");
  CHECK(render_type(builtin_method(t_int(), "lt", 0)->ret) == "Bool");
  CHECK(render_type(builtin_method(t_str(), "substring", 0)->params[1]) ==
        "Int");
  // turnstile values expose exactly apply(S) -> T
  auto ap = builtin_method(t_stile(t_cls("Lazy"), t_int()), "apply", 0);
  REQUIRE(ap.has_value());
  REQUIRE(ap->params.size() == 1);
  CHECK(render_type(ap->params[0]) == "Lazy");
  CHECK(render_type(ap->ret) == "Int");
  CHECK_FALSE(
      builtin_method(t_stile(t_cls("Lazy"), t_int()), "force", 0).has_value());
  CHECK(render_type(
            builtin_method(t_cls("Function", {t_int(), t_str()}), "apply", 0)
                ->ret) == "Str");
  CHECK(render_type(builtin_method(t_cls("Closeable"), "readLine", 0)->ret) ==
        "Str");
}

TEST_CASE("free built-ins: generic ones use the fresh counter") {
  auto some = builtin_free("some", 7);
  REQUIRE(some.has_value());
  CHECK(render_type(some->params[0]) == "?t7");
  CHECK(render_type(some->ret) == "Optional<?t7>");
  auto none = builtin_free("none", 9);
  CHECK(render_type(none->ret) == "Optional<?t9>");
  CHECK(none->params.empty());
  CHECK(render_type(builtin_free("openFile", 0)->ret) == "Closeable");
  CHECK(render_type(builtin_free("not", 0)->params[0]) == "Bool");
  CHECK_FALSE(builtin_free("mystery", 0).has_value());
}

TEST_CASE("instantiate substitutes rigid parameters structurally") {
  std::map<std::string, Ty> env{{"K", t_str()}, {"V", t_int()}};
  Ty t = t_cls("Map", {t_param("K"), t_cls("List", {t_param("V")})});
  CHECK(render_type(instantiate(t, env)) == "Map<Str, List<Int>>");
  CHECK(render_type(instantiate(t_param("R"), env)) == "R");  // unmapped
  Ty st = t_stile(t_cls("Ctx", {t_param("K")}), t_param("V"));
  CHECK(render_type(instantiate(st, env)) == "Ctx<Str> |- Int");
}

namespace {

const char* kScopeText = R"(
dsl Ops {
  priorities lo, hi { lo < hi }

  static Int [hi] "sum" _ (Int x) { return x; }
  static Int [lo] _ "+" _ (Int a, Int b) { return a; }
  static Int "if-exists" _ (Int x) { return x; }
  static Map<Str, Int> "{" "}" () { return new Map<Str, Int>(); }
  literal Ops "a" () { return null; }
  literal Ops _ "!" (Ops x) { return x; }
}
dsl Entry<K, V> {
  V "it" () { return null; }
  Unit "it" "=" _ (V v) { return; }
  V _ "??" (Entry<K, V> e) { return null; }
}
)";

}  // namespace

TEST_CASE("scope building buckets static operators by their leading token") {
  auto p = load(kScopeText);
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  CHECK(sc.static_ops.size() == 4);
  CHECK(sc.literal_ops.size() == 2);
  REQUIRE(sc.ident_led.count("sum") == 1);
  REQUIRE(sc.ident_led.count("if") == 1);  // "if-exists" leads with "if"
  CHECK(sc.ident_led.count("if-exists") == 0);
  CHECK(sc.operand_led.size() == 1);
  CHECK(sc.static_ops[sc.operand_led[0]].op->prio == "lo");
  CHECK(sc.other_led.size() == 1);  // the "{" "}" literal part
  CHECK(sc.lit_ident_led.count("a") == 1);
  CHECK(sc.lit_operand_led.size() == 1);
  // instance operators never enter the static tables
  CHECK(sc.types.count("Entry") == 1);
}

TEST_CASE("candidates: instance operators come from assumption frames") {
  auto p = load(kScopeText);
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  PriorityOrder ord =
      *merge_priorities(classes_of(*p), {}, "types.ctx").order;
  Subst s;
  int fresh = 0;
  std::vector<Ty> frames{t_cls("Entry", {t_str(), t_int()})};

  // expected Unit: only the it-assignment fits
  auto cands =
      candidates_for(t_unit(), frames, 0, false, sc, ord, s, &fresh, "it");
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].frame_depth == 0);
  CHECK(render_type(cands[0].param_types[0]) == "Int");

  // expected Int: the it-getter fits (ident "it"); `_ "??"` is operand led
  auto cands2 = candidates_for(t_int(), frames, 0, false, sc, ord, s, &fresh,
                               "it");
  REQUIRE(cands2.size() == 1);
  CHECK(cands2[0].op->syntax.size() == 1);

  // no frames: nothing
  auto cands3 = candidates_for(t_unit(), {}, 0, false, sc, ord, s, &fresh,
                               "it");
  CHECK(cands3.empty());
}

TEST_CASE("candidates: identifier bucketing and return-type filtering") {
  auto p = load(kScopeText);
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  PriorityOrder ord = *merge_priorities(classes_of(*p), {}, "types.ctx").order;
  Subst s;
  int fresh = 0;

  auto sum = candidates_for(t_int(), {}, 0, false, sc, ord, s, &fresh, "sum");
  REQUIRE(sum.size() == 1);
  CHECK(sum[0].op->prio == "hi");

  // expected Map<Str, Int> admits the "{" "}" constructor, led by "{"
  auto braces = candidates_for(t_cls("Map", {t_str(), t_int()}), {}, 0, false,
                               sc, ord, s, &fresh, "");
  REQUIRE(braces.size() == 1);
  CHECK(braces[0].op->syntax[0].text == "{");

  // a fresh var as expected constrains nothing: the bucketed "sum" operator
  // plus the always-considered punctuation-led one
  auto any = candidates_for(t_var(fresh++), {}, 0, false, sc, ord, s, &fresh,
                            "sum");
  CHECK(any.size() == 2);
}

TEST_CASE("candidates: min_rank excludes low priorities") {
  auto p = load(kScopeText);
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  PriorityOrder ord = *merge_priorities(classes_of(*p), {}, "types.ctx").order;
  Subst s;
  int fresh = 0;
  int hi = ord.rank_of("Ops", "hi");
  auto cands =
      candidates_for(t_int(), {}, hi, false, sc, ord, s, &fresh, "sum");
  CHECK(cands.size() == 1);  // sum has rank hi
  auto none = candidates_for(t_int(), {}, hi + 1, false, sc, ord, s, &fresh,
                             "sum");
  CHECK(none.empty());
  // unprioritized operators sit at bottom rank
  auto ifx =
      candidates_for(t_int(), {}, 1, false, sc, ord, s, &fresh, "if");
  CHECK(ifx.empty());
}

TEST_CASE("candidates: literal mode sees only literal operators") {
  auto p = load(kScopeText);
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  PriorityOrder ord = *merge_priorities(classes_of(*p), {}, "types.ctx").order;
  Subst s;
  int fresh = 0;
  auto lits = candidates_for(t_cls("Ops"), {}, 0, true, sc, ord, s, &fresh,
                             "a");
  REQUIRE(lits.size() == 1);
  CHECK(lits[0].op->is_literal);
  auto sums = candidates_for(t_int(), {}, 0, true, sc, ord, s, &fresh, "sum");
  CHECK(sums.empty());
}

TEST_CASE("leading candidates cover operand-led statics and instance ops") {
  auto p = load(kScopeText);
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  Subst s;
  int fresh = 0;
  std::vector<Ty> frames{t_cls("Entry", {t_str(), t_int()})};
  auto leads = leading_candidates(frames, false, sc, s, &fresh);
  REQUIRE(leads.size() == 2);
  CHECK(leads[0].frame_depth == 0);  // instance `_ "??"` sorts first
  CHECK(render_type(leads[0].ret_type) == "Int");
  CHECK(leads[1].frame_depth == -1);  // static `_ "+" _`
  auto lit_leads = leading_candidates({}, true, sc, s, &fresh);
  REQUIRE(lit_leads.size() == 1);
  CHECK(lit_leads[0].op->is_literal);
}

TEST_CASE("requires clauses match assumption frames and bind their variables") {
  Subst s;
  std::vector<Ty> frames{t_cls("FileRead")};
  CHECK(check_requires({t_cls("FileRead")}, {}, frames, s));
  CHECK_FALSE(check_requires({t_cls("FileRead")}, {}, {}, s));
  CHECK_FALSE(check_requires({t_cls("Scoped", {t_int()})}, {}, frames, s));

  // a generic requirement binds from the frame that satisfies it
  std::map<std::string, Ty> inst{{"K", t_var(0)}};
  std::vector<Ty> frames2{t_cls("Scoped", {t_int()})};
  CHECK(check_requires({t_cls("Scoped", {t_param("K")})}, inst, frames2, s));
  CHECK(render_type(s.resolve(t_var(0))) == "Int");
}

TEST_CASE("candidates honour requires against the frame stack") {
  auto p = load(R"(
dsl FileRead { }
dsl IO {
  static Str "readAll" () requires FileRead { return ""; }
}
)");
  OperatorScope sc = OperatorScope::build(classes_of(*p), classes_of(*p));
  PriorityOrder ord = *merge_priorities(classes_of(*p), {}, "t").order;
  Subst s;
  int fresh = 0;
  auto without =
      candidates_for(t_str(), {}, 0, false, sc, ord, s, &fresh, "readAll");
  CHECK(without.empty());
  std::vector<Ty> frames{t_cls("FileRead")};
  auto with =
      candidates_for(t_str(), frames, 0, false, sc, ord, s, &fresh, "readAll");
  CHECK(with.size() == 1);
}
