// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Lexical helpers for Java source: comment/literal masking, identifier and
// call-site tokenization, prose term extraction, and try/catch scanning.
// Nothing here builds an AST; every routine works on masked character data.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace exguard::javasrc {

inline bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

/// Replaces the contents of comments and string/char literals (including
/// text blocks) with spaces. Newlines are kept so offsets and line numbers
/// in the result match the input byte for byte.
inline std::string mask(std::string_view src) {
  std::string out(src);
  const std::size_t n = src.size();
  std::size_t i = 0;
  auto blank = [&](std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to && k < n; ++k) {
      if (out[k] != '\n') out[k] = ' ';
    }
  };
  while (i < n) {
    const char c = src[i];
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      std::size_t j = src.find('\n', i);
      if (j == std::string_view::npos) j = n;
      blank(i, j);
      i = j;
    } else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      std::size_t j = src.find("*/", i + 2);
      j = (j == std::string_view::npos) ? n : j + 2;
      blank(i, j);
      i = j;
    } else if (c == '"' && src.substr(i, 3) == "\"\"\"") {
      std::size_t j = i + 3;
      while (j < n) {
        if (src[j] == '\\') {
          j += 2;
          continue;
        }
        if (src.substr(j, 3) == "\"\"\"") break;
        ++j;
      }
      const std::size_t end = std::min(n, j + 3);
      blank(i + 3, std::min(j, n));
      i = end;
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < n && src[j] != c && src[j] != '\n') {
        j += (src[j] == '\\') ? 2 : 1;
      }
      blank(i + 1, std::min(j, n));
      i = (j < n && src[j] == c) ? j + 1 : j;
    } else {
      ++i;
    }
  }
  return out;
}

/// Splits on '\n'. A trailing newline does not produce an extra empty line.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline = true) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < lines.size() || trailing_newline) out += '\n';
  }
  return out;
}

/// Offsets of the first character of every line; used to map offsets to
/// 1-based line numbers.
class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') starts_.push_back(i + 1);
    }
  }
  int line_of(std::size_t offset) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    return static_cast<int>(it - starts_.begin());
  }

 private:
  std::vector<std::size_t> starts_;
};

inline const std::unordered_set<std::string>& java_keywords() {
  static const std::unordered_set<std::string> kw = {
      "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
      "const", "continue", "default", "do", "double", "else", "enum", "extends", "final",
      "finally", "float", "for", "goto", "if", "implements", "import", "instanceof", "int",
      "interface", "long", "native", "new", "package", "private", "protected", "public",
      "return", "short", "static", "strictfp", "super", "switch", "synchronized", "this",
      "throw", "throws", "transient", "try", "void", "volatile", "while", "var", "record",
      "true", "false", "null", "yield"};
  return kw;
}

struct Identifier {
  std::string text;
  std::size_t offset = 0;
};

/// Identifiers of already-masked text, in order of appearance.
inline std::vector<Identifier> identifiers(std::string_view masked) {
  std::vector<Identifier> out;
  std::size_t i = 0;
  while (i < masked.size()) {
    if (is_ident_start(masked[i]) && (i == 0 || !is_ident_char(masked[i - 1]))) {
      std::size_t j = i;
      while (j < masked.size() && is_ident_char(masked[j])) ++j;
      out.push_back({std::string(masked.substr(i, j - i)), i});
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

/// A call or constructor invocation `qualifier.name(` / `new Name(`.
struct CallToken {
  std::string name;
  std::string qualifier;  // empty when unqualified
  std::size_t offset = 0;
};

inline std::vector<CallToken> call_tokens(std::string_view masked) {
  static const std::unordered_set<std::string> not_calls = {
      "if", "while", "for", "switch", "catch", "synchronized", "return", "throw", "new",
      "try", "do", "else", "super", "this", "assert"};
  std::vector<CallToken> out;
  for (const Identifier& id : identifiers(masked)) {
    if (not_calls.count(id.text)) continue;
    std::size_t j = id.offset + id.text.size();
    while (j < masked.size() && std::isspace(static_cast<unsigned char>(masked[j]))) ++j;
    if (j < masked.size() && masked[j] == '<') {
      int depth = 0;
      for (; j < masked.size(); ++j) {
        if (masked[j] == '<') ++depth;
        if (masked[j] == '>' && --depth == 0) break;
        if (masked[j] == ';' || masked[j] == '{') break;
      }
      if (j < masked.size() && masked[j] == '>') ++j;
      while (j < masked.size() && std::isspace(static_cast<unsigned char>(masked[j]))) ++j;
    }
    if (j >= masked.size() || masked[j] != '(') continue;
    CallToken call{id.text, {}, id.offset};
    std::size_t k = id.offset;
    while (k > 0 && std::isspace(static_cast<unsigned char>(masked[k - 1]))) --k;
    if (k > 0 && masked[k - 1] == '.') {
      std::size_t e = k - 1;
      while (e > 0 && std::isspace(static_cast<unsigned char>(masked[e - 1]))) --e;
      std::size_t b = e;
      while (b > 0 && is_ident_char(masked[b - 1])) --b;
      if (b < e) call.qualifier = std::string(masked.substr(b, e - b));
    }
    out.push_back(std::move(call));
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Splits `FileReader` -> {File, Reader}, `readLine` -> {read, Line},
/// `URLConnection` -> {URL, Connection}.
inline std::vector<std::string> camel_parts(std::string_view word) {
  std::vector<std::string> parts;
  std::string cur;
  for (std::size_t i = 0; i < word.size(); ++i) {
    const char c = word[i];
    const bool upper = std::isupper(static_cast<unsigned char>(c));
    const bool next_lower = i + 1 < word.size() && std::islower(static_cast<unsigned char>(word[i + 1]));
    const bool prev_lower = i > 0 && std::islower(static_cast<unsigned char>(word[i - 1]));
    const bool prev_upper = i > 0 && std::isupper(static_cast<unsigned char>(word[i - 1]));
    if (!cur.empty() && upper && (prev_lower || (prev_upper && next_lower))) {
      parts.push_back(cur);
      cur.clear();
    }
    if (c == '_' || c == '$') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
      continue;
    }
    cur += c;
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

inline bool has_internal_upper(std::string_view word) {
  for (std::size_t i = 1; i < word.size(); ++i) {
    if (std::isupper(static_cast<unsigned char>(word[i]))) return true;
  }
  return false;
}

inline const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at",
      "be", "been", "before", "being", "but", "by", "can", "could", "did", "does", "doing",
      "each", "etc", "for", "from", "had", "has", "have", "how", "if", "in", "into", "is",
      "it", "its", "it's", "just", "may", "might", "more", "most", "must", "no", "not",
      "of", "on", "or", "other", "over", "own", "same", "should", "so", "some", "such",
      "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
      "those", "through", "to", "too", "under", "until", "up", "very", "was", "were",
      "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
      "would", "you", "your", "via", "cannot", "e.g", "i.e", "like", "include", "includes",
      "including", "typically", "usually", "often", "there", "here", "one", "two",
      "code", "perform", "performs", "performed", "operation", "operations",
      // Java syntax noise that carries no scenario meaning
      "new", "public", "private", "protected", "static", "void", "return", "final",
      "class", "null", "true", "false", "int", "long", "var", "try", "catch", "throw",
      "throws", "import", "package", "else", "for", "while", "boolean", "double", "char",
      "byte", "short", "float", "this", "super", "extends", "implements", "println",
      "system", "out", "err"};
  return words;
}

/// Lowercase content terms of prose or code: words split on non-identifier
/// characters, camel-case words contribute both the whole word and its
/// parts, stop words and tokens shorter than three characters are dropped.
/// Terms come back in order of first appearance.
inline std::vector<std::string> ordered_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::unordered_set<std::string> seen;
  auto add = [&](std::string_view w) {
    std::string lw = to_lower(w);
    if (lw.size() < 3) return;
    if (std::all_of(lw.begin(), lw.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) return;
    if (stop_words().count(lw)) return;
    if (seen.insert(lw).second) terms.push_back(std::move(lw));
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      std::string_view word = text.substr(i, j - i);
      add(word);
      if (has_internal_upper(word) || word.find('_') != std::string_view::npos) {
        for (const std::string& p : camel_parts(word)) add(p);
      }
      i = j;
    } else {
      ++i;
    }
  }
  return terms;
}

inline std::set<std::string> content_terms(std::string_view text) {
  const std::vector<std::string> v = ordered_terms(text);
  return {v.begin(), v.end()};
}

/// Offset of the '}' matching the '{' at `open`, or npos.
inline std::size_t match_brace(std::string_view masked, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < masked.size(); ++i) {
    if (masked[i] == '{') ++depth;
    if (masked[i] == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

inline std::size_t match_paren(std::string_view masked, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < masked.size(); ++i) {
    if (masked[i] == '(') ++depth;
    if (masked[i] == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

inline std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

inline bool keyword_at(std::string_view masked, std::size_t i, std::string_view kw) {
  if (masked.substr(i, kw.size()) != kw) return false;
  if (i > 0 && is_ident_char(masked[i - 1])) return false;
  const std::size_t e = i + kw.size();
  return e >= masked.size() || !is_ident_char(masked[e]);
}

/// Net brace depth reached: returns {max depth, final depth, first line at
/// which depth went negative or 0}. Lines are 1-based relative to the text.
struct BraceProfile {
  int max_depth = 0;
  int final_depth = 0;
  int first_negative_line = 0;
};

inline BraceProfile brace_profile(std::string_view text) {
  const std::string masked = mask(text);
  BraceProfile p;
  int depth = 0;
  int line = 1;
  for (char c : masked) {
    if (c == '\n') ++line;
    if (c == '{') p.max_depth = std::max(p.max_depth, ++depth);
    if (c == '}') {
      --depth;
      if (depth < 0 && p.first_negative_line == 0) p.first_negative_line = line;
    }
  }
  p.final_depth = depth;
  return p;
}

struct CatchClause {
  std::vector<std::string> types;
  std::string variable;
  int line = 0;             // line of the `catch` keyword
  int end_line = 0;         // line of the closing brace
  std::string body;         // original text between the braces
  bool body_empty = true;   // nothing but whitespace/comments inside
};

struct TryRegion {
  int try_line = 0;
  int body_open_line = 0;
  int body_close_line = 0;
  std::vector<CatchClause> catches;
  bool has_finally = false;
  int end_line = 0;
};

/// Finds every try statement (nested ones included) and its catch clauses.
inline std::vector<TryRegion> scan_try_blocks(std::string_view text) {
  const std::string masked = mask(text);
  const LineIndex index(masked);
  std::vector<TryRegion> regions;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (!keyword_at(masked, i, "try")) continue;
    std::size_t j = skip_space(masked, i + 3);
    if (j < masked.size() && masked[j] == '(') {
      j = match_paren(masked, j);
      if (j == std::string::npos) break;
      j = skip_space(masked, j + 1);
    }
    if (j >= masked.size() || masked[j] != '{') continue;
    const std::size_t close = match_brace(masked, j);
    if (close == std::string::npos) break;
    TryRegion region;
    region.try_line = index.line_of(i);
    region.body_open_line = index.line_of(j);
    region.body_close_line = index.line_of(close);
    region.end_line = region.body_close_line;
    std::size_t k = skip_space(masked, close + 1);
    while (keyword_at(masked, k, "catch")) {
      CatchClause clause;
      clause.line = index.line_of(k);
      std::size_t p = skip_space(masked, k + 5);
      if (p >= masked.size() || masked[p] != '(') break;
      const std::size_t pe = match_paren(masked, p);
      if (pe == std::string::npos) break;
      // `final A | B e`: the last identifier is the variable; others are types
      // (qualified names keep only the simple name).
      std::string param = masked.substr(p + 1, pe - p - 1);
      std::size_t start = 0;
      std::vector<std::string> alternatives;
      while (start <= param.size()) {
        std::size_t bar = param.find('|', start);
        if (bar == std::string::npos) bar = param.size();
        alternatives.push_back(param.substr(start, bar - start));
        start = bar + 1;
      }
      for (std::size_t a = 0; a < alternatives.size(); ++a) {
        std::vector<Identifier> words = identifiers(alternatives[a]);
        words.erase(std::remove_if(words.begin(), words.end(),
                                   [](const Identifier& w) { return w.text == "final"; }),
                    words.end());
        if (a + 1 == alternatives.size() && !words.empty()) {
          clause.variable = words.back().text;
          words.pop_back();
        }
        if (!words.empty()) clause.types.push_back(words.back().text);
      }
      std::size_t bo = skip_space(masked, pe + 1);
      if (bo >= masked.size() || masked[bo] != '{') break;
      const std::size_t bc = match_brace(masked, bo);
      if (bc == std::string::npos) break;
      clause.end_line = index.line_of(bc);
      clause.body = std::string(text.substr(bo + 1, bc - bo - 1));
      std::string_view masked_body = std::string_view(masked).substr(bo + 1, bc - bo - 1);
      clause.body_empty = std::all_of(masked_body.begin(), masked_body.end(),
                                      [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
      region.end_line = clause.end_line;
      region.catches.push_back(std::move(clause));
      k = skip_space(masked, bc + 1);
    }
    if (keyword_at(masked, k, "finally")) {
      std::size_t fo = skip_space(masked, k + 7);
      if (fo < masked.size() && masked[fo] == '{') {
        const std::size_t fc = match_brace(masked, fo);
        if (fc != std::string::npos) {
          region.has_finally = true;
          region.end_line = index.line_of(fc);
        }
      }
    }
    regions.push_back(std::move(region));
  }
  return regions;
}

/// First `max_words` whitespace-separated words, single-space joined.
inline std::string cap_words(std::string_view text, std::size_t max_words) {
  std::string out;
  std::size_t count = 0, i = 0;
  while (i < text.size() && count < max_words) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      if (count++) out += ' ';
      out.append(text.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

/// Leading whitespace of a line.
inline std::string indentation(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return std::string(line.substr(0, i));
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace exguard::javasrc
