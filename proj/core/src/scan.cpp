#include "ctx/scan.hpp"

#include <vector>

namespace ctx {

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

int skip_ws(const std::string& s, int pos, int limit) {
  while (pos < limit) {
    char c = s[pos];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pos++;
    } else if (c == '/' && pos + 1 < limit && s[pos + 1] == '/') {
      while (pos < limit && s[pos] != '\n') pos++;
    } else {
      break;
    }
  }
  return pos;
}

int lex_ident_end(const std::string& s, int pos, int limit) {
  if (pos >= limit || !is_ident_start(s[pos])) return pos;
  int p = pos;
  while (p < limit && is_ident_char(s[p])) p++;
  return p;
}

std::string ident_at(const std::string& s, int pos, int limit) {
  int e = lex_ident_end(s, pos, limit);
  return s.substr(pos, e - pos);
}

int match_tok(const std::string& s, int pos, int limit,
              const std::string& tok) {
  pos = skip_ws(s, pos, limit);
  if (pos + (int)tok.size() > limit) return -1;
  if (s.compare(pos, tok.size(), tok) != 0) return -1;
  int end = pos + (int)tok.size();
  if (!tok.empty() && is_ident_char(tok.back()) && end < limit &&
      is_ident_char(s[end]))
    return -1;  // identifier tokens must be delimited
  return end;
}

int lex_str_lit(const std::string& s, int pos, int limit, std::string* out) {
  if (pos >= limit || s[pos] != '"') return -1;
  int p = pos + 1;
  std::string val;
  while (p < limit) {
    char c = s[p];
    if (c == '"') {
      if (out) *out = val;
      return p + 1;
    }
    if (c == '\\' && p + 1 < limit) {
      char e = s[p + 1];
      if (e == 'n') val += '\n';
      else if (e == 't') val += '\t';
      else if (e == '\\') val += '\\';
      else if (e == '"') val += '"';
      else return -1;
      p += 2;
      continue;
    }
    if (c == '\n') return -1;
    val += c;
    p++;
  }
  return -1;
}

int lex_int_lit(const std::string& s, int pos, int limit, long long* out) {
  int p = pos;
  long long v = 0;
  bool any = false;
  while (p < limit && s[p] >= '0' && s[p] <= '9') {
    v = v * 10 + (s[p] - '0');
    any = true;
    p++;
  }
  if (!any) return -1;
  if (out) *out = v;
  return p;
}

int scan_to_depth0(const std::string& s, int pos, int limit,
                   const std::string& stop_chars, int* open_at) {
  std::vector<std::pair<char, int>> opens;  // opener char, offset
  while (pos < limit) {
    char c = s[pos];
    if (c == '"') {
      int e = lex_str_lit(s, pos, limit, nullptr);
      if (e < 0) {
        if (open_at) *open_at = pos;
        return -1;
      }
      pos = e;
      continue;
    }
    if (c == '/' && pos + 1 < limit && s[pos + 1] == '/') {
      while (pos < limit && s[pos] != '\n') pos++;
      continue;
    }
    if (opens.empty() && stop_chars.find(c) != std::string::npos) return pos;
    if (c == '(' || c == '[' || c == '{') {
      opens.push_back({c, pos});
    } else if (c == ')' || c == ']' || c == '}') {
      char want = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (opens.empty()) {
        if (open_at) *open_at = pos;
        return -1;
      }
      if (opens.back().first != want) {
        if (open_at) *open_at = opens.back().second;
        return -1;
      }
      opens.pop_back();
    }
    pos++;
  }
  if (open_at) *open_at = opens.empty() ? pos : opens.back().second;
  return -1;
}

}  // namespace ctx
