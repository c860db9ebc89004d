// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Splits Java files into bounded code units at brace-depth boundaries and
// produces function-level summaries.

#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/gateway.hpp"
#include "exguard/javasrc.hpp"

namespace exguard::planner {

inline constexpr int kDefaultLimit = 200;
inline constexpr std::size_t kSummaryWords = 120;

struct SourceFile {
  std::string path;
  std::vector<std::string> lines;
  bool trailing_newline = true;

  int line_count() const { return static_cast<int>(lines.size()); }
  std::string text() const { return javasrc::join_lines(lines, trailing_newline); }
};

inline SourceFile make_source(std::string path, std::string_view text) {
  SourceFile f;
  f.path = std::move(path);
  f.lines = javasrc::split_lines(text);
  f.trailing_newline = text.empty() || text.back() == '\n';
  return f;
}

inline SourceFile load_source(const std::string& path) { return make_source(path, cee::read_file(path)); }

enum class UnitKind { method, class_fragment, file_fragment };

inline std::string_view to_string(UnitKind k) {
  switch (k) {
    case UnitKind::method: return "method";
    case UnitKind::class_fragment: return "class-fragment";
    case UnitKind::file_fragment: return "file-fragment";
  }
  return "file-fragment";
}

struct CodeUnit {
  std::string id;
  std::string path;
  int start = 1;  // absolute, inclusive
  int end = 0;
  std::vector<std::string> lines;
  int nesting = 0;
  UnitKind kind = UnitKind::file_fragment;
  bool oversize = false;

  std::string text() const { return javasrc::join_lines(lines, true); }
  int length() const { return end - start + 1; }
  const std::string& line(int absolute) const { return lines.at(static_cast<std::size_t>(absolute - start)); }
  bool contains(int absolute) const { return absolute >= start && absolute <= end; }
};

inline std::string unit_id(const std::string& path, int start, int end) {
  return path + ":" + std::to_string(start) + "-" + std::to_string(end);
}

/// Maximum brace depth reached inside `text`, measured from its first line.
inline int nesting_level(std::string_view text) { return javasrc::brace_profile(text).max_depth; }

namespace detail {

struct LineDepths {
  std::vector<int> before;        // depth at the start of each line
  std::vector<int> after;         // depth at the end of each line
  std::vector<bool> member_level; // only type bodies are open after the line
  std::vector<std::string> masked;
};

// Whether the '{' at `open` starts a class, interface, enum or record body:
// the text since the previous ; { or } declares a type.
inline bool opens_type_body(const std::string& masked, std::size_t open) {
  std::size_t b = open;
  while (b > 0 && masked[b - 1] != ';' && masked[b - 1] != '{' && masked[b - 1] != '}') --b;
  for (const javasrc::Identifier& id : javasrc::identifiers(std::string_view(masked).substr(b, open - b))) {
    if (id.text == "class" || id.text == "interface" || id.text == "enum" || id.text == "record") return true;
  }
  return false;
}

inline LineDepths line_depths(const SourceFile& file) {
  LineDepths d;
  const std::string masked = javasrc::mask(file.text());
  d.masked = javasrc::split_lines(masked);
  d.masked.resize(file.lines.size());
  struct Open {
    int line;
    bool type_body;
  };
  std::vector<Open> stack;
  int non_type = 0;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < d.masked.size(); ++i) {
    d.before.push_back(static_cast<int>(stack.size()));
    for (std::size_t k = 0; k < d.masked[i].size(); ++k) {
      const char c = d.masked[i][k];
      if (c == '{') {
        const bool type_body = opens_type_body(masked, offset + k);
        stack.push_back({static_cast<int>(i) + 1, type_body});
        if (!type_body) ++non_type;
      } else if (c == '}') {
        if (stack.empty()) {
          throw Error(ErrorCode::unbalanced_braces,
                      file.path + ":" + std::to_string(i + 1) + ": closing brace without opening brace");
        }
        if (!stack.back().type_body) --non_type;
        stack.pop_back();
      }
    }
    offset += d.masked[i].size() + 1;
    d.after.push_back(static_cast<int>(stack.size()));
    d.member_level.push_back(non_type == 0);
  }
  if (!stack.empty()) {
    throw Error(ErrorCode::unbalanced_braces,
                file.path + ":" + std::to_string(stack.front().line) + ": brace never closed");
  }
  return d;
}

// A region is a run of lines that must stay together: a split is only
// allowed after a line that ends a statement, declaration or block while
// no method, initializer or statement block is open.
inline bool cut_after(const LineDepths& d, std::size_t i) {
  if (!d.member_level[i]) return false;
  const std::string t = javasrc::trim(d.masked[i]);
  if (t.empty()) return true;
  const char last = t.back();
  return last == '}' || last == ';' || last == '{';
}

struct Region {
  int start = 0;
  int end = 0;
  int length() const { return end - start + 1; }
};

inline std::vector<Region> regions(const LineDepths& d) {
  std::vector<Region> out;
  int start = 1;
  for (std::size_t i = 0; i < d.masked.size(); ++i) {
    if (cut_after(d, i) || i + 1 == d.masked.size()) {
      out.push_back({start, static_cast<int>(i) + 1});
      start = static_cast<int>(i) + 2;
    }
  }
  return out;
}

inline bool is_method_region(const LineDepths& d, const Region& r) {
  if (d.before[r.start - 1] < 1 || d.after[r.end - 1] != d.before[r.start - 1]) return false;
  std::string joined;
  for (int l = r.start; l <= r.end; ++l) joined += d.masked[l - 1] + "\n";
  const std::size_t brace = joined.find('{');
  const std::size_t paren = joined.find('(');
  return brace != std::string::npos && paren != std::string::npos && paren < brace &&
         javasrc::trim(joined).back() == '}';
}

}  // namespace detail

/// Disjoint units covering every line. Lines are packed greedily into units
/// of at most `limit` lines without splitting a region; a region longer
/// than the limit becomes its own oversize unit.
inline std::vector<CodeUnit> segment(const SourceFile& file, int limit = kDefaultLimit) {
  if (limit < 1) throw Error(ErrorCode::config, "segment limit must be >= 1");
  std::vector<CodeUnit> units;
  if (file.lines.empty()) return units;
  const detail::LineDepths d = detail::line_depths(file);
  const std::vector<detail::Region> regions = detail::regions(d);

  std::vector<std::vector<detail::Region>> groups;
  int used = 0;
  for (const detail::Region& r : regions) {
    if (groups.empty() || used + r.length() > limit) {
      groups.push_back({r});
      used = r.length();
    } else {
      groups.back().push_back(r);
      used += r.length();
    }
  }

  for (const auto& g : groups) {
    CodeUnit u;
    u.path = file.path;
    u.start = g.front().start;
    u.end = g.back().end;
    u.id = unit_id(file.path, u.start, u.end);
    u.lines.assign(file.lines.begin() + (u.start - 1), file.lines.begin() + u.end);
    u.nesting = nesting_level(u.text());
    u.oversize = u.length() > limit;
    int methods = 0;
    bool only_members = true;
    for (const detail::Region& r : g) {
      if (detail::is_method_region(d, r)) {
        ++methods;
      } else if (d.before[r.start - 1] < 1 || d.after[r.end - 1] < 1) {
        only_members = false;
      }
    }
    if (d.before[u.start - 1] == 0 || !only_members) {
      u.kind = UnitKind::file_fragment;
    } else {
      u.kind = methods == 1 ? UnitKind::method : UnitKind::class_fragment;
    }
    units.push_back(std::move(u));
  }
  return units;
}

struct FunctionSummary {
  std::string unit_id;
  std::string text;
  std::set<std::string> identifiers;
  bool degraded = false;
};

/// Capitalized identifiers (types) and call names, keywords excluded.
inline std::set<std::string> mentioned_identifiers(std::string_view code) {
  const std::string masked = javasrc::mask(code);
  std::set<std::string> out;
  for (const javasrc::Identifier& id : javasrc::identifiers(masked)) {
    if (javasrc::java_keywords().count(id.text)) continue;
    if (std::isupper(static_cast<unsigned char>(id.text[0]))) out.insert(id.text);
  }
  for (const javasrc::CallToken& c : javasrc::call_tokens(masked)) {
    if (!javasrc::java_keywords().count(c.name)) out.insert(c.name);
  }
  return out;
}

inline FunctionSummary summarize(const CodeUnit& unit, llm::CompletionBackend& backend, int malformed_retries = 2) {
  FunctionSummary s;
  s.unit_id = unit.id;
  const std::string code = unit.text();
  s.identifiers = mentioned_identifiers(code);
  if (javasrc::trim(code).empty()) {
    s.text = "empty unit";
    return s;
  }
  try {
    const llm::Completion c =
        llm::complete_structured(backend, "planner", llm::render("planner", {{"codebase", code}}), malformed_retries);
    s.text = javasrc::cap_words(c.payload->at("summary").get<std::string>(), kSummaryWords);
  } catch (const Error&) {
    std::string prose = "Unit mentions";
    for (const std::string& id : s.identifiers) prose += " " + id;
    s.text = javasrc::cap_words(prose, kSummaryWords);
    s.degraded = true;
  }
  return s;
}

}  // namespace exguard::planner
