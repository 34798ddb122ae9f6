#pragma once
#include <stdexcept>
#include <string>
#include <vector>

namespace ctx {

struct Diag {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string file;
  int offset = 0;
  std::string message;
};

// "file:offset: severity: message"
std::string render_diag(const Diag& d);

struct DiagList {
  std::vector<Diag> items;

  bool has_error() const;
  void error(const std::string& file, int offset, const std::string& msg);
  void warning(const std::string& file, int offset, const std::string& msg);
  void append(const DiagList& other);
  // Diagnostics are reported sorted by source offset within a file.
  void sort_by_offset();
  std::string render() const;
};

// Invariant violations inside the implementation itself, never user mistakes.
struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace ctx
