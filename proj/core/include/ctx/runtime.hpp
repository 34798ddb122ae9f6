#pragma once
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctx/ast.hpp"
#include "ctx/lower.hpp"

namespace ctx {

struct Value;
using V = std::shared_ptr<Value>;

struct Env;
using EnvP = std::shared_ptr<Env>;

struct Env {
  std::map<std::string, V> vars;
  EnvP parent;

  static EnvP child(EnvP parent);
  V* find(const std::string& n);
  void define(const std::string& n, V v);
};

// One open handle in the virtual filesystem. close is idempotent; reading a
// closed handle faults.
struct FsHandle {
  std::string path;
  std::vector<std::string> lines;
  size_t next = 0;
  bool closed = false;
  int close_calls = 0;
};

struct VirtualFS {
  std::map<std::string, std::vector<std::string>> files;
  std::vector<std::shared_ptr<FsHandle>> opened;  // every open, in order

  // null when the path is absent; the caller faults with provenance
  std::shared_ptr<FsHandle> open(const std::string& path);
};

struct Value {
  enum class K { Int, Bool, Str, Unit, Null, Obj, Closure, List, Map, Optional,
                 Handle };
  K k = K::Unit;
  long long i = 0;
  bool b = false;
  std::string s;
  const ClassDecl* cls = nullptr;            // Obj
  std::map<std::string, V> fields;           // Obj
  std::vector<std::string> params;           // Closure
  IrP body;                                  // Closure
  EnvP captured;                             // Closure
  bool catches_return = false;               // Closure: `fun` bodies only
  std::vector<V> list;                       // List
  std::vector<std::pair<V, V>> map;          // Map, insertion-ordered
  bool opt_has = false;                      // Optional
  V opt_v;
  std::shared_ptr<FsHandle> handle;          // Handle
};

V v_int(long long i);
V v_bool(bool b);
V v_str(std::string s);
V v_unit();
V v_null();

// Value equality used by Map keys and tests: by value for Int/Bool/Str/Null,
// by identity otherwise.
bool value_equal(const V& a, const V& b);
std::string render_value(const V& v);

// Untyped fault propagating through TryFinally; uncaught ends the run.
struct FaultSignal {
  std::string message;
  std::string where;
};

struct ReturnSignal {
  V value;
};

struct Machine {
  const LoweredProgram* prog = nullptr;
  VirtualFS* vfs = nullptr;
  std::ostream* out = nullptr;
  long long steps = 0;

  // test hook: named counters the `tick` built-in increments
  std::map<std::string, long long> counters;
};

V eval(const IrP& ir, const EnvP& env, Machine& m);

struct RunResult {
  int exit_code = 0;
  std::string fault;  // rendered "fault: <message> at <provenance>"
};

// Executes the main block; exit 1 on uncaught fault (message on `err`).
RunResult run_program(const LoweredProgram& prog, VirtualFS& vfs,
                      std::ostream& out, std::ostream& err);

}  // namespace ctx
