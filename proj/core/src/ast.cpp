#include "ctx/ast.hpp"

#include <sstream>

namespace ctx {

namespace {
Ty make(TypeT t) { return std::make_shared<const TypeT>(std::move(t)); }
}  // namespace

Ty t_prim(Prim p) {
  TypeT t;
  t.k = TypeT::K::Prim;
  t.prim = p;
  return make(std::move(t));
}

Ty t_int() { static Ty t = t_prim(Prim::Int); return t; }
Ty t_bool() { static Ty t = t_prim(Prim::Bool); return t; }
Ty t_str() { static Ty t = t_prim(Prim::Str); return t; }
Ty t_void() { static Ty t = t_prim(Prim::Void); return t; }
Ty t_unit() { static Ty t = t_prim(Prim::Unit); return t; }

Ty t_cls(std::string name, std::vector<Ty> args) {
  TypeT t;
  t.k = TypeT::K::Cls;
  t.cls = std::move(name);
  t.args = std::move(args);
  return make(std::move(t));
}

Ty t_stile(Ty lhs, Ty rhs) {
  TypeT t;
  t.k = TypeT::K::Stile;
  t.lhs = std::move(lhs);
  t.rhs = std::move(rhs);
  return make(std::move(t));
}

Ty t_var(int id, bool name_kind) {
  TypeT t;
  t.k = TypeT::K::Var;
  t.var = id;
  t.name_kind = name_kind;
  return make(std::move(t));
}

Ty t_param(std::string name, bool name_kind) {
  TypeT t;
  t.k = TypeT::K::Param;
  t.pname = std::move(name);
  t.name_kind = name_kind;
  return make(std::move(t));
}

Ty t_name(NameP n) {
  TypeT t;
  t.k = TypeT::K::Name;
  t.name = std::move(n);
  return make(std::move(t));
}

bool type_equal(const Ty& a, const Ty& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->k != b->k) return false;
  switch (a->k) {
    case TypeT::K::Prim:
      return a->prim == b->prim;
    case TypeT::K::Cls: {
      if (a->cls != b->cls || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); i++)
        if (!type_equal(a->args[i], b->args[i])) return false;
      return true;
    }
    case TypeT::K::Stile:
      return type_equal(a->lhs, b->lhs) && type_equal(a->rhs, b->rhs);
    case TypeT::K::Var:
      return a->var == b->var && a->name_kind == b->name_kind;
    case TypeT::K::Param:
      return a->pname == b->pname && a->name_kind == b->name_kind;
    case TypeT::K::Name:
      return name_ast_equal(a->name, b->name);
  }
  return false;
}

std::string render_type(const Ty& t) {
  if (!t) return "<null>";
  switch (t->k) {
    case TypeT::K::Prim:
      switch (t->prim) {
        case Prim::Int: return "Int";
        case Prim::Bool: return "Bool";
        case Prim::Str: return "Str";
        case Prim::Void: return "Void";
        case Prim::Unit: return "Unit";
        case Prim::Null: return "Null";
      }
      return "?";
    case TypeT::K::Cls: {
      std::string out = t->cls;
      if (!t->args.empty()) {
        out += "<";
        for (size_t i = 0; i < t->args.size(); i++) {
          if (i) out += ", ";
          out += render_type(t->args[i]);
        }
        out += ">";
      }
      return out;
    }
    case TypeT::K::Stile:
      return render_type(t->lhs) + " |- " + render_type(t->rhs);
    case TypeT::K::Var:
      return (t->name_kind ? "?n" : "?t") + std::to_string(t->var);
    case TypeT::K::Param:
      return t->pname;
    case TypeT::K::Name:
      return "'" + (t->name ? t->name->text : std::string("?"));
  }
  return "?";
}

bool name_ast_equal(const NameP& a, const NameP& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->op != b->op) return false;
  if (a->kids.size() != b->kids.size()) return false;
  for (size_t i = 0; i < a->kids.size(); i++)
    if (!name_ast_equal(a->kids[i], b->kids[i])) return false;
  return true;
}

namespace {

void serialize_name(const NameP& a, std::string& out) {
  if (!a || !a->op) {
    out += "?";
    return;
  }
  out += a->op->owner ? a->op->owner->name : std::string("?");
  out += ".";
  out += std::to_string(a->op->decl_idx);
  out += "(";
  for (size_t i = 0; i < a->kids.size(); i++) {
    if (i) out += ",";
    serialize_name(a->kids[i], out);
  }
  out += ")";
}

// Injective escape into identifier characters: '_' itself is escaped, so no
// escaped sequence can collide with literal text.
void escape_ident(const std::string& in, std::string& out) {
  for (char c : in) {
    switch (c) {
      case '_': out += "_u"; break;
      case '.': out += "_d"; break;
      case '(': out += "_b"; break;
      case ')': out += "_e"; break;
      case ',': out += "_c"; break;
      case '?': out += "_q"; break;
      default: out += c;
    }
  }
}

}  // namespace

std::string erase_name(const NameP& a, int scope) {
  std::string ser;
  serialize_name(a, ser);
  std::string out = "n" + std::to_string(scope) + "_";
  escape_ident(ser, out);
  return out;
}

const TypeParam* ClassDecl::find_tparam(const std::string& n) const {
  for (const auto& tp : tparams)
    if (tp.name == n) return &tp;
  return nullptr;
}

const FieldDecl* ClassDecl::find_field(const std::string& n) const {
  for (const auto& f : fields)
    if (f.name == n) return &f;
  return nullptr;
}

std::string Program::span_text(const RawSpan& s) const {
  if (!src || s.begin >= s.end) return "";
  return src->substr(s.begin, s.end - s.begin);
}

std::string render_operator(const OpDecl& op) {
  std::ostringstream os;
  if (op.is_literal) os << "literal ";
  else if (op.is_static) os << "static ";
  if (!op.tparams.empty()) {
    os << "<";
    for (size_t i = 0; i < op.tparams.size(); i++) {
      if (i) os << ", ";
      const auto& tp = op.tparams[i];
      os << tp.name;
      if (tp.is_name) os << ": " << tp.name_type;
      else if (!tp.bound.empty()) os << " extends " << tp.bound;
    }
    os << "> ";
  }
  os << render_type(op.ret) << " ";
  if (!op.prio.empty()) os << "[" << op.prio << "] ";
  for (const auto& e : op.syntax) {
    switch (e.k) {
      case SyntaxElem::K::Part:
        os << "\"" << e.text << "\" ";
        break;
      case SyntaxElem::K::Operand:
        os << "_";
        if (e.rep == Rep::Star) os << "*";
        if (e.rep == Rep::Plus) os << "+";
        if (!e.prio.empty()) os << " [" << e.prio << "]";
        os << " ";
        break;
      case SyntaxElem::K::NameOp:
        os << e.text << " ";
        break;
    }
  }
  os << "(";
  for (size_t i = 0; i < op.params.size(); i++) {
    if (i) os << ", ";
    os << render_type(op.params[i].type);
    if (op.params[i].variadic) os << "...";
    os << " " << op.params[i].name;
  }
  os << ")";
  if (!op.requires_classes.empty()) {
    os << " requires ";
    for (size_t i = 0; i < op.requires_classes.size(); i++) {
      if (i) os << ", ";
      os << render_type(op.requires_classes[i]);
    }
  }
  return os.str();
}

}  // namespace ctx
