#include "ctx/diag.hpp"

#include <algorithm>
#include <sstream>

namespace ctx {

std::string render_diag(const Diag& d) {
  std::ostringstream os;
  os << d.file << ":" << d.offset << ": "
     << (d.severity == Diag::Severity::Error ? "error" : "warning") << ": "
     << d.message;
  return os.str();
}

bool DiagList::has_error() const {
  for (const auto& d : items)
    if (d.severity == Diag::Severity::Error) return true;
  return false;
}

void DiagList::error(const std::string& file, int offset,
                     const std::string& msg) {
  items.push_back({Diag::Severity::Error, file, offset, msg});
}

void DiagList::warning(const std::string& file, int offset,
                       const std::string& msg) {
  items.push_back({Diag::Severity::Warning, file, offset, msg});
}

void DiagList::append(const DiagList& other) {
  items.insert(items.end(), other.items.begin(), other.items.end());
}

void DiagList::sort_by_offset() {
  std::stable_sort(items.begin(), items.end(),
                   [](const Diag& a, const Diag& b) {
                     if (a.file != b.file) return a.file < b.file;
                     return a.offset < b.offset;
                   });
}

std::string DiagList::render() const {
  std::string out;
  for (const auto& d : items) {
    out += render_diag(d);
    out += "\n";
  }
  return out;
}

}  // namespace ctx
