#pragma once
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctx/ast.hpp"
#include "ctx/loader.hpp"
#include "ctx/priority.hpp"
#include "ctx/typed.hpp"
#include "ctx/types.hpp"

namespace ctx {

// What the parser is asked to produce at a position. Part of the memo key
// after canonicalization (vars renamed by first occurrence, duplicate
// assumption frames collapsed keeping the innermost).
struct Goal {
  Ty expected;
  std::vector<Ty> frames;  // assumption stack, innermost LAST
  int min_rank = 0;        // priority lower bound on the root operator
  bool literal_mode = false;
};

struct ParseStats {
  long long input_length = 0;
  long long languages_seen = 0;  // distinct canonical goals modulo position
  long long memo_entries = 0;
  long long evaluations = 0;     // memo misses actually computed
  long long grow_rounds = 0;     // left-recursion chain extension rounds
  double wall_ms = 0;
};

struct PValue {
  TE node;
  int end = 0;
  Ty type;
  // rank of the root operator; kernel forms and parenthesized expressions are
  // exempt from priority bounds
  int root_rank = 1 << 28;
  bool kernel_root = true;
  // tie order: frame depth (instance ops; statics last), import, declaration
  std::array<int, 3> ord{1 << 20, 1 << 20, 1 << 20};
};

struct ParseOutcome {
  bool ok = false;
  PValue v;
  int furthest = 0;
  std::vector<std::string> expected_toks;
};

// Local environment visible to kernel identifier lookup during one span parse.
struct LexEnv {
  struct Frame { std::map<std::string, Ty> vars; };
  std::vector<Frame> frames;

  void push() { frames.emplace_back(); }
  void pop() { frames.pop_back(); }
  void define(const std::string& n, const Ty& t);
  const Ty* lookup(const std::string& n) const;
};

// Context a body is checked in: enclosing class for field/this access, rigid
// type parameters, and assumption frames implied by a requires clause.
struct BodyCtx {
  const ClassDecl* self = nullptr;  // null in main / static without owner use
  bool in_static = true;
  std::map<std::string, Ty> tparams;  // name -> Param type
  Ty ret;                             // expected return type
  // ambient assumption stack for statement-level expressions: the requires
  // clause of the body, or the goal frames of an enclosing block operand
  std::vector<Ty> frames;
};

// One packrat parse session per source file. Single-threaded. Left recursion
// through leading operands is handled by chain growth; re-entering a goal that
// is still in progress (a unit-coercion cycle) fails that inner attempt, and
// results computed while a chain at the same position was growing are not
// cached.
class Session {
 public:
  Session(const LinkedProgram* linked, const Program* unit,
          const PriorityOrder* order);
  ~Session();

  // Parses the span [begin,end) completely at the goal; diagnostics carry the
  // furthest failure position and expected tokens.
  std::optional<TE> parse_full(int begin, int end, const Goal& goal, Subst& s,
                               DiagList& diags);

  ParseOutcome parse_expr(int pos, const Goal& goal, Subst& s);

  // Longest name occurrence of name_type at pos, literal mode. When bound is
  // set, succeeds only on a structurally equal tree.
  ParseOutcome parse_name_occurrence(int pos, const std::string& name_type,
                                     const NameP& bound, Subst& s,
                                     NameP* out);

  // Statement-list checking shared by definition bodies and block operands.
  TBlockP check_block(const KBlock& kb, Subst& s, DiagList& diags);

  LexEnv& env() { return env_; }
  BodyCtx& body() { return body_; }
  const ParseStats& stats() const { return stats_; }
  ParseStats& stats() { return stats_; }
  const Program* unit() const { return unit_; }
  const LinkedProgram* linked() const { return linked_; }
  const PriorityOrder* order() const { return order_; }
  const OperatorScope& scope() const { return scope_; }
  int fresh_var() { return fresh_++; }

  void set_trace(std::function<void(const std::string&)> sink) {
    trace_ = std::move(sink);
  }

  std::string canonical_goal(const Goal& g, const Subst& s,
                             std::vector<int>* varlist = nullptr) const;

 private:
  struct MemoEntry;
  struct ChainElem;

  ParseOutcome eval_goal(int pos, const Goal& goal, Subst& s);
  void typed_candidates(int pos, const Goal& goal, Subst& s,
                        std::vector<std::pair<PValue, Subst>>& out,
                        ParseOutcome& fail);
  void kernel_candidates(int pos, const Goal& goal, Subst& s,
                         std::vector<std::pair<PValue, Subst>>& out,
                         ParseOutcome& fail);
  void chain_candidates(int pos, const Goal& goal, Subst& s,
                        std::vector<std::pair<PValue, Subst>>& out,
                        ParseOutcome& fail);
  bool match_operator(const OperatorCandidate& cand, int pos, const Goal& goal,
                      Subst& s, PValue& out, ParseOutcome& fail,
                      const ChainElem* seed);
  // Grows the left-recursive chain cache at pos for the goal's frame stack.
  const std::vector<ChainElem>& grow_left_recursion(int pos, const Goal& goal,
                                                    Subst& s);
  PValue better(const PValue& a, const PValue& b) const;
  void note_fail(ParseOutcome& fail, int pos, const std::string& expected);

  // kernel expression forms
  bool k_literals(int pos, const Goal& g, Subst& s,
                  std::vector<std::pair<PValue, Subst>>& out,
                  ParseOutcome& fail);
  bool k_paren(int pos, const Goal& g, Subst& s,
               std::vector<std::pair<PValue, Subst>>& out, ParseOutcome& fail);
  bool k_block(int pos, const Goal& g, Subst& s,
               std::vector<std::pair<PValue, Subst>>& out, ParseOutcome& fail);
  bool k_new(int pos, const Goal& g, Subst& s,
             std::vector<std::pair<PValue, Subst>>& out, ParseOutcome& fail);
  bool k_closure(int pos, const Goal& g, Subst& s,
                 std::vector<std::pair<PValue, Subst>>& out,
                 ParseOutcome& fail);
  bool k_ident_chain(int pos, const Goal& g, Subst& s,
                     std::vector<std::pair<PValue, Subst>>& out,
                     ParseOutcome& fail);
  // identifier chains / calls starting from an already parsed base
  bool parse_args(int pos, const std::vector<Ty>& ptypes, bool variadic,
                  const Goal& g, Subst& s, std::vector<TE>& args, int* end,
                  ParseOutcome& fail);
  // one operand: unwraps a turnstile parameter type into a frame push and
  // wraps the result in a Context node
  bool parse_ctx_operand(int pos, const Ty& ptype, int min_rank,
                         const std::vector<Ty>& frames, bool lit, Subst& s,
                         TE* node, int* end, ParseOutcome& fail);
  bool check_assign(const KStmt& st, TStmt& ts, Subst& s, DiagList& diags);
  std::optional<Ty> parse_type_at(int* pos) const;  // surface type in spans

  const LinkedProgram* linked_;
  const Program* unit_;
  const std::string* src_;
  const PriorityOrder* order_;
  std::vector<const ClassDecl*> scope_order_;  // bare static call resolution
  OperatorScope scope_;
  LexEnv env_;
  BodyCtx body_;
  ParseStats stats_;
  int fresh_ = 0;
  int limit_ = 0;
  std::unordered_map<std::string, std::unique_ptr<MemoEntry>> memo_;
  std::unordered_map<std::string, std::unique_ptr<std::vector<ChainElem>>>
      chains_;
  std::map<std::string, int> languages_;
  std::set<std::string> growing_;  // chain keys currently being grown
  bool poisoned_ = false;  // current evaluation saw an in-progress chain
  std::function<void(const std::string&)> trace_;

  friend struct SessionTestPeek;
};

}  // namespace ctx
