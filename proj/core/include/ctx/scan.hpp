#pragma once
#include <optional>
#include <string>

namespace ctx {

bool is_ident_start(char c);
bool is_ident_char(char c);

// Whitespace and // line comments.
int skip_ws(const std::string& s, int pos, int limit);

// Returns end of identifier at pos, or pos when none.
int lex_ident_end(const std::string& s, int pos, int limit);

std::string ident_at(const std::string& s, int pos, int limit);

// Skips whitespace, then matches tok literally. Identifier-shaped tokens must
// be delimited on the right (no longer identifier continues). Returns the new
// position or -1.
int match_tok(const std::string& s, int pos, int limit, const std::string& tok);

// Double-quoted string with \n \t \\ \" escapes. Returns end position past the
// closing quote, or -1; decoded value in out when non-null.
int lex_str_lit(const std::string& s, int pos, int limit, std::string* out);

int lex_int_lit(const std::string& s, int pos, int limit, long long* out);

// Scans forward from pos keeping bracket depth, skipping string literals and
// comments, until one of stop_chars appears at depth zero. Returns its
// position, or -1 when unbalanced / not found; *open_at gets the offset of the
// unmatched opener when unbalanced.
int scan_to_depth0(const std::string& s, int pos, int limit,
                   const std::string& stop_chars, int* open_at = nullptr);

}  // namespace ctx
