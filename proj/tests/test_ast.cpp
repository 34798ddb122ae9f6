#include "ctx/ast.hpp"

#include <random>
#include <set>

#include "ctx/scan.hpp"
#include "doctest.h"

using namespace ctx;

TEST_CASE("type rendering") {
  CHECK(render_type(t_int()) == "Int");
  CHECK(render_type(t_void()) == "Void");
  CHECK(render_type(t_cls("Map", {t_str(), t_int()})) == "Map<Str, Int>");
  CHECK(render_type(t_stile(t_cls("FileRead"), t_cls("List", {t_str()}))) ==
        "FileRead |- List<Str>");
  CHECK(render_type(t_var(3)) == "?t3");
  CHECK(render_type(t_var(3, true)) == "?n3");
  CHECK(render_type(t_param("K")) == "K");
}

TEST_CASE("type equality is structural") {
  CHECK(type_equal(t_cls("Map", {t_str(), t_int()}),
                   t_cls("Map", {t_str(), t_int()})));
  CHECK_FALSE(type_equal(t_cls("Map", {t_str(), t_int()}),
                         t_cls("Map", {t_int(), t_str()})));
  CHECK_FALSE(type_equal(t_int(), t_bool()));
  CHECK(type_equal(t_stile(t_cls("S"), t_int()), t_stile(t_cls("S"), t_int())));
  CHECK_FALSE(type_equal(t_stile(t_cls("S"), t_int()), t_int()));
  CHECK(type_equal(t_var(1), t_var(1)));
  CHECK_FALSE(type_equal(t_var(1), t_var(2)));
}

namespace {

// Three synthetic literal operators: two leaves and one binary node, enough to
// build arbitrary shaped name trees.
struct NameOps {
  ClassDecl cls;
  OpDecl* leaf_a;
  OpDecl* leaf_b;
  OpDecl* pair;

  NameOps() {
    cls.name = "N";
    cls.ops.resize(3);
    for (int i = 0; i < 3; i++) {
      cls.ops[i].owner = &cls;
      cls.ops[i].decl_idx = i;
      cls.ops[i].is_literal = true;
    }
    leaf_a = &cls.ops[0];
    leaf_b = &cls.ops[1];
    pair = &cls.ops[2];
  }

  NameP leaf(const OpDecl* op, std::string text) const {
    auto n = std::make_shared<NameAst>();
    n->op = op;
    n->text = std::move(text);
    return n;
  }

  NameP node(NameP l, NameP r) const {
    auto n = std::make_shared<NameAst>();
    n->op = pair;
    n->kids = {std::move(l), std::move(r)};
    return n;
  }

  NameP random_tree(std::mt19937& rng, int depth) const {
    if (depth == 0 || rng() % 3 == 0)
      return leaf(rng() % 2 ? leaf_a : leaf_b, "t" + std::to_string(rng() % 4));
    return node(random_tree(rng, depth - 1), random_tree(rng, depth - 1));
  }
};

NameP rebuild(const NameOps& ops, const NameP& n) {
  auto c = std::make_shared<NameAst>();
  c->op = n->op;
  c->text = "other text";  // equality must not look at matched text
  for (const auto& k : n->kids) c->kids.push_back(rebuild(ops, k));
  return c;
}

std::string shape(const NameP& n) {
  std::string s = std::to_string(n->op->decl_idx) + "(";
  for (const auto& k : n->kids) s += shape(k) + ",";
  return s + ")";
}

}  // namespace

TEST_CASE("name tree equality is structural and ignores source text") {
  NameOps ops;
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; trial++) {
    NameP a = ops.random_tree(rng, 4);
    NameP b = ops.random_tree(rng, 4);
    CHECK(name_ast_equal(a, rebuild(ops, a)));
    CHECK(name_ast_equal(a, b) == (shape(a) == shape(b)));
  }
}

TEST_CASE("name tree equality distinguishes operators and arity") {
  NameOps ops;
  NameP a = ops.leaf(ops.leaf_a, "x");
  NameP b = ops.leaf(ops.leaf_b, "x");
  CHECK_FALSE(name_ast_equal(a, b));
  CHECK_FALSE(name_ast_equal(ops.node(a, a), ops.node(a, b)));
  CHECK_FALSE(name_ast_equal(ops.node(a, b), ops.node(b, a)));
  CHECK(name_ast_equal(ops.node(a, b), ops.node(a, b)));
}

TEST_CASE("erased names are valid identifiers, injective per scope") {
  NameOps ops;
  std::mt19937 rng(11);
  std::vector<NameP> trees;
  std::set<std::string> shapes;
  while (trees.size() < 24) {
    NameP t = ops.random_tree(rng, 4);
    if (shapes.insert(shape(t)).second) trees.push_back(t);
  }
  std::set<std::string> out;
  for (int scope = 0; scope < 2; scope++) {
    for (const auto& t : trees) {
      std::string id = erase_name(t, scope);
      REQUIRE(!id.empty());
      CHECK(is_ident_start(id[0]));
      for (char c : id) CHECK(is_ident_char(c));
      CHECK(out.insert(id).second);  // distinct tree or scope, distinct name
      CHECK(erase_name(rebuild(ops, t), scope) == id);  // text independent
    }
  }
  CHECK(out.size() == trees.size() * 2);
}

TEST_CASE("operator signatures render with parts, operands and priorities") {
  ClassDecl cls;
  cls.name = "M";
  OpDecl op;
  op.owner = &cls;
  op.is_static = true;
  op.prio = "p1";
  op.tparams.push_back({"K", false, "", ""});
  op.ret = t_param("K");
  op.syntax.push_back({SyntaxElem::K::Operand, "", "", Rep::One});
  op.syntax.push_back({SyntaxElem::K::Part, "[", "", Rep::One});
  op.syntax.push_back({SyntaxElem::K::Operand, "", "p2", Rep::One});
  op.syntax.push_back({SyntaxElem::K::Part, "]", "", Rep::One});
  op.params.push_back({"m", t_cls("Map", {t_param("K"), t_int()}), false});
  op.params.push_back({"k", t_param("K"), false});
  CHECK(render_operator(op) ==
        "static <K> K [p1] _ \"[\" _ [p2] \"]\" (Map<K, Int> m, K k)");
}

TEST_CASE("operator rendering covers names, repetition and requires") {
  ClassDecl cls;
  cls.name = "M";
  OpDecl op;
  op.owner = &cls;
  op.tparams.push_back({"id", true, "Id", ""});
  op.tparams.push_back({"R", false, "", "Closeable"});
  op.ret = t_unit();
  op.syntax.push_back({SyntaxElem::K::NameOp, "id", "", Rep::One});
  op.syntax.push_back({SyntaxElem::K::Part, "do", "", Rep::One});
  op.syntax.push_back({SyntaxElem::K::Operand, "", "", Rep::Plus});
  op.params.push_back({"body", t_param("R"), true});
  op.requires_classes.push_back(t_cls("FileRead"));
  CHECK(render_operator(op) ==
        "<id: Id, R extends Closeable> Unit id \"do\" _+ (R... body) requires "
        "FileRead");
}
