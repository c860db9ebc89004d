// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Try-span planning, try/catch patch synthesis, patch application and
// syntactic validation of patched units.

#pragma once

#include <algorithm>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/cfg.hpp"
#include "exguard/detector.hpp"
#include "exguard/gateway.hpp"
#include "exguard/mock_backend.hpp"
#include "exguard/planner.hpp"

namespace exguard::handler {

using json = nlohmann::json;

inline constexpr std::string_view kIndentUnit = "    ";

struct TrySpan {
  int start = 0;
  int end = 0;
  bool operator==(const TrySpan&) const = default;
  auto operator<=>(const TrySpan&) const = default;
};

namespace detail {

inline bool overlaps(const cfg::Stmt& s, int a, int b) { return s.first_line <= b && s.last_line >= a; }

inline std::string stmt_text(const std::string& masked, const cfg::Stmt& s) {
  if (s.begin >= masked.size()) return {};
  return masked.substr(s.begin, std::min(s.end, masked.size() - 1) - s.begin + 1);
}

// Name declared by a local variable declaration statement, if any.
inline std::optional<std::string> declared_local(const std::string& text) {
  static const std::regex decl(
      R"(^\s*(?:final\s+)?([A-Za-z_$][\w$]*(?:\s*\.\s*[A-Za-z_$][\w$]*)*(?:\s*<[^;=(){}]*>)?(?:\s*\[\s*\])*)\s+([A-Za-z_$][\w$]*)\s*(?:=|;|\[))");
  std::smatch m;
  if (!std::regex_search(text, m, decl)) return std::nullopt;
  const std::string type = m[1].str();
  static const std::set<std::string> not_types = {"return", "throw", "new", "else", "case", "yield", "assert", "goto"};
  if (not_types.count(type) || javasrc::java_keywords().count(m[2].str())) return std::nullopt;
  return m[2].str();
}

inline bool uses(const std::string& text, const std::set<std::string>& names) {
  for (const javasrc::Identifier& id : javasrc::identifiers(text)) {
    if (id.offset > 0 && text[id.offset - 1] == '.') continue;
    if (names.count(id.text)) return true;
  }
  return false;
}

[[noreturn]] inline void cannot_place(const detector::SensitiveSegment& seg, const std::string& why) {
  throw Error(ErrorCode::precondition, "cannot place a try around " + seg.id() + ": " + why);
}

}  // namespace detail

/// Smallest statement-aligned line range covering the segment inside one
/// statement list. Later statements of the same list that use locals
/// declared in the range are pulled in so the declarations stay in scope.
inline TrySpan plan_tryspan(const detector::SensitiveSegment& seg, const planner::CodeUnit& unit,
                            const cfg::Cfg& graph) {
  if (seg.start > seg.end || !unit.contains(seg.start) || !unit.contains(seg.end)) {
    throw Error(ErrorCode::segment_outside_unit,
                "segment " + seg.id() + " lies outside unit " + unit.id);
  }
  const std::string masked = javasrc::mask(unit.text());
  const std::vector<cfg::Stmt>* list = &graph.program;
  bool in_code = std::none_of(list->begin(), list->end(), [](const cfg::Stmt& s) { return s.kind == cfg::StmtKind::decl; });
  int lo = unit.start - 1, hi = unit.end + 1;  // exclusive bounds of the current list
  int s = seg.start, e = seg.end;

  for (;;) {
    std::vector<std::size_t> hit;
    for (std::size_t i = 0; i < list->size(); ++i) {
      if (detail::overlaps((*list)[i], s, e)) hit.push_back(i);
    }
    if (hit.empty()) detail::cannot_place(seg, "no statement on the segment lines");
    if (hit.size() == 1) {
      const cfg::Stmt& x = (*list)[hit.front()];
      const bool must_descend = !in_code || x.kind == cfg::StmtKind::decl;
      const cfg::Body* inner = nullptr;
      if (x.kind != cfg::StmtKind::switch_) {
        for (const cfg::Body& b : x.bodies) {
          if (!b.braced) continue;
          const bool strictly_inside = s > b.open_line && e < b.close_line;
          const int cs = std::max(s, b.open_line + 1), ce = std::min(e, b.close_line - 1);
          const bool touches = cs <= ce && std::any_of(b.stmts.begin(), b.stmts.end(),
                                                       [&](const cfg::Stmt& t) { return detail::overlaps(t, cs, ce); });
          if (strictly_inside || (must_descend && touches)) {
            inner = &b;
            break;
          }
        }
      }
      if (inner) {
        s = std::max(s, inner->open_line + 1);
        e = std::min(e, inner->close_line - 1);
        lo = inner->open_line;
        hi = inner->close_line;
        in_code = x.kind != cfg::StmtKind::decl || !x.class_like;
        list = &inner->stmts;
        continue;
      }
      if (must_descend) detail::cannot_place(seg, "it covers a declaration rather than statements");
    } else if (!in_code) {
      detail::cannot_place(seg, "it spans several members");
    }
    break;
  }

  // Statement indices [first, last] within `list`, grown until no statement
  // outside shares a line with the range and no later statement uses a
  // local declared inside it.
  std::size_t first = list->size(), last = 0;
  for (std::size_t i = 0; i < list->size(); ++i) {
    if (detail::overlaps((*list)[i], s, e)) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }
  for (bool grew = true; grew;) {
    grew = false;
    const int a = (*list)[first].first_line, b = (*list)[last].last_line;
    if (first > 0 && (*list)[first - 1].last_line >= a) {
      --first;
      grew = true;
    }
    if (last + 1 < list->size() && (*list)[last + 1].first_line <= b) {
      ++last;
      grew = true;
    }
    std::set<std::string> locals;
    for (std::size_t i = first; i <= last; ++i) {
      if (auto name = detail::declared_local(detail::stmt_text(masked, (*list)[i]))) locals.insert(*name);
    }
    if (!locals.empty()) {
      for (std::size_t k = list->size(); k-- > last + 1;) {
        if (detail::uses(detail::stmt_text(masked, (*list)[k]), locals)) {
          last = k;
          grew = true;
          break;
        }
      }
    }
  }
  TrySpan span{(*list)[first].first_line, (*list)[last].last_line};
  if (span.start <= lo || span.end >= hi) detail::cannot_place(seg, "its statements share a line with a block brace");
  return span;
}

inline TrySpan plan_tryspan(const detector::SensitiveSegment& seg, const planner::CodeUnit& unit) {
  return plan_tryspan(seg, unit, cfg::build_cfg(unit));
}

struct Patch {
  std::string unit_id;
  int start = 0;  // absolute lines of the wrapped range
  int end = 0;
  std::vector<std::string> prefix;
  std::vector<std::string> suffix;
  std::vector<std::string> caught;
  std::vector<std::string> segments;
  bool degraded = false;

  TrySpan span() const { return {start, end}; }
};

struct PatchTarget {
  TrySpan span;
  std::vector<std::string> types;
  std::vector<std::string> segments;
};

/// Targets with overlapping spans merged: spans unioned, types and segment
/// ids concatenated without duplicates. Output sorted by span.
inline std::vector<PatchTarget> combine_targets(std::vector<PatchTarget> targets) {
  std::sort(targets.begin(), targets.end(), [](const PatchTarget& a, const PatchTarget& b) { return a.span < b.span; });
  std::vector<PatchTarget> out;
  auto add_all = [](std::vector<std::string>& to, const std::vector<std::string>& from) {
    for (const std::string& x : from) {
      if (std::find(to.begin(), to.end(), x) == to.end()) to.push_back(x);
    }
  };
  for (PatchTarget& t : targets) {
    if (!out.empty() && t.span.start <= out.back().span.end) {
      out.back().span.end = std::max(out.back().span.end, t.span.end);
      add_all(out.back().types, t.types);
      add_all(out.back().segments, t.segments);
    } else {
      out.push_back(std::move(t));
    }
  }
  return out;
}

/// Distinct types with every subtype ahead of its supertypes: deeper nodes
/// first, then by name.
inline std::vector<std::string> order_catches(const std::vector<std::string>& types, const cee::CeeTree& tree) {
  std::vector<std::string> out;
  for (const std::string& t : types) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    const int da = tree.contains(a) ? tree.node(a).depth : 0;
    const int db = tree.contains(b) ? tree.node(b).depth : 0;
    if (da != db) return da > db;
    return a < b;
  });
  return out;
}

/// Re-indents catch clauses text (starting with the try body's closing
/// brace) by brace depth below `indent`.
inline std::vector<std::string> format_suffix(const std::string& text, const std::string& indent,
                                              std::string_view unit = kIndentUnit) {
  const std::vector<std::string> raw = javasrc::split_lines(text);
  const std::vector<std::string> masked = javasrc::split_lines(javasrc::mask(text));
  std::vector<std::string> out;
  int depth = 1;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::string t = javasrc::trim(raw[i]);
    if (t.empty()) continue;
    const std::string m = i < masked.size() ? javasrc::trim(masked[i]) : t;
    std::size_t lead = 0;
    while (lead < m.size() && m[lead] == '}') ++lead;
    int at = std::max(0, depth - static_cast<int>(lead));
    std::string line = indent;
    for (int d = 0; d < at; ++d) line += unit;
    out.push_back(line + t);
    for (char c : m) {
      if (c == '{') ++depth;
      if (c == '}') --depth;
    }
  }
  return out;
}

/// Catch clauses of a handler reply, if the reply wraps exactly the given
/// lines in one leading try block.
inline std::optional<std::string> parse_handler_reply(const std::string& code, const std::vector<std::string>& wrapped) {
  const std::vector<javasrc::TryRegion> regions = javasrc::scan_try_blocks(code);
  if (regions.empty()) return std::nullopt;
  const javasrc::TryRegion& r = regions.front();
  const std::vector<std::string> lines = javasrc::split_lines(code);
  auto blank = [](const std::string& l) { return javasrc::trim(l).empty(); };
  for (int l = 1; l < r.try_line; ++l) {
    if (!blank(lines[l - 1])) return std::nullopt;
  }
  if (javasrc::trim(lines[r.try_line - 1]) != "try {" || r.body_open_line != r.try_line) return std::nullopt;
  std::vector<std::string> body, want;
  for (int l = r.body_open_line + 1; l < r.body_close_line; ++l) {
    if (!blank(lines[l - 1])) body.push_back(javasrc::trim(lines[l - 1]));
  }
  for (const std::string& l : wrapped) {
    if (!blank(l)) want.push_back(javasrc::trim(l));
  }
  if (body != want) return std::nullopt;
  if (javasrc::trim(lines[r.body_close_line - 1]).rfind('}', 0) != 0) return std::nullopt;
  for (std::size_t l = static_cast<std::size_t>(r.end_line); l < lines.size(); ++l) {
    if (!blank(lines[l])) return std::nullopt;
  }
  std::vector<std::string> tail(lines.begin() + (r.body_close_line - 1), lines.begin() + r.end_line);
  return javasrc::join_lines(tail, false);
}

struct OptimizedUnit {
  std::string unit_id;
  int start = 1;
  std::vector<std::string> original;
  std::vector<std::string> lines;
  std::vector<Patch> patches;  // sorted by start

  std::string text() const { return javasrc::join_lines(lines, true); }
};

inline std::string span_string(const TrySpan& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + "]";
}

/// Wraps every patch span with its prefix and suffix; wrapped lines gain
/// one indent level and every other line is copied unchanged.
inline OptimizedUnit apply(const planner::CodeUnit& unit, std::vector<Patch> patches,
                           std::string_view indent_unit = kIndentUnit) {
  std::sort(patches.begin(), patches.end(), [](const Patch& a, const Patch& b) { return a.span() < b.span(); });
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Patch& p = patches[i];
    if (p.start > p.end || !unit.contains(p.start) || !unit.contains(p.end)) {
      throw Error(ErrorCode::segment_outside_unit, "patch " + span_string(p.span()) + " lies outside unit " + unit.id);
    }
    if (i > 0 && p.start <= patches[i - 1].end) {
      throw Error(ErrorCode::overlapping_patches,
                  "patches " + span_string(patches[i - 1].span()) + " and " + span_string(p.span()) + " overlap");
    }
  }
  OptimizedUnit out;
  out.unit_id = unit.id;
  out.start = unit.start;
  out.original = unit.lines;
  std::size_t next = 0;
  for (int l = unit.start; l <= unit.end; ++l) {
    const std::string& line = unit.line(l);
    if (next < patches.size() && l == patches[next].start) {
      out.lines.insert(out.lines.end(), patches[next].prefix.begin(), patches[next].prefix.end());
    }
    const bool wrapped = next < patches.size() && l >= patches[next].start && l <= patches[next].end;
    out.lines.push_back(wrapped && !javasrc::trim(line).empty() ? std::string(indent_unit) + line : line);
    if (next < patches.size() && l == patches[next].end) {
      out.lines.insert(out.lines.end(), patches[next].suffix.begin(), patches[next].suffix.end());
      ++next;
    }
  }
  out.patches = std::move(patches);
  return out;
}

/// Text of one patched region: prefix, wrapped lines, suffix.
inline std::string patch_block(const OptimizedUnit& opt, const Patch& p, std::string_view indent_unit = kIndentUnit) {
  std::vector<std::string> lines = p.prefix;
  for (int l = p.start; l <= p.end; ++l) {
    const std::string& line = opt.original.at(static_cast<std::size_t>(l - opt.start));
    lines.push_back(javasrc::trim(line).empty() ? line : std::string(indent_unit) + line);
  }
  lines.insert(lines.end(), p.suffix.begin(), p.suffix.end());
  return javasrc::join_lines(lines, true);
}

inline std::vector<std::string> check_block(const std::string& block, const cee::CeeTree& tree,
                                            const std::string& where) {
  std::vector<std::string> out;
  const javasrc::BraceProfile profile = javasrc::brace_profile(block);
  if (profile.final_depth != 0 || profile.first_negative_line != 0) {
    out.push_back(where + ": unbalanced braces");
    return out;
  }
  const std::vector<javasrc::TryRegion> regions = javasrc::scan_try_blocks(block);
  if (regions.empty()) {
    out.push_back(where + ": no try statement");
    return out;
  }
  const javasrc::TryRegion& r = regions.front();
  if (r.catches.empty()) out.push_back(where + ": try without catch");
  std::vector<std::string> earlier;
  for (const javasrc::CatchClause& c : r.catches) {
    if (c.body_empty) out.push_back(where + ": empty catch body");
    for (const std::string& t : c.types) {
      if (!tree.contains(t)) {
        out.push_back(where + ": unknown exception type " + t);
        continue;
      }
      for (const std::string& e : earlier) {
        if (cee::is_same_or_subtype(tree, t, e)) {
          out.push_back(where + ": unreachable catch of " + t + " after " + e);
          break;
        }
      }
    }
    for (const std::string& t : c.types) {
      if (tree.contains(t)) earlier.push_back(t);
    }
  }
  return out;
}

/// Violations of the patched unit; empty when braces balance as in the
/// original and every patch try has non-empty, known, reachable catches.
inline std::vector<std::string> validate(const OptimizedUnit& opt, const cee::CeeTree& tree) {
  std::vector<std::string> out;
  const javasrc::BraceProfile before = javasrc::brace_profile(javasrc::join_lines(opt.original, true));
  const javasrc::BraceProfile after = javasrc::brace_profile(opt.text());
  if (before.final_depth != after.final_depth) out.push_back(opt.unit_id + ": unbalanced braces");
  for (const Patch& p : opt.patches) {
    for (std::string& v : check_block(patch_block(opt, p), tree, opt.unit_id + "@" + std::to_string(p.start))) {
      out.push_back(std::move(v));
    }
  }
  return out;
}

struct GenerateResult {
  std::vector<Patch> patches;
  int degraded_calls = 0;
};

/// Types named by the catch clauses of formatted suffix lines, in order.
inline std::vector<std::string> caught_types(const std::vector<std::string>& suffix) {
  std::vector<std::string> out;
  const std::vector<javasrc::TryRegion> regions = javasrc::scan_try_blocks("try {\n" + javasrc::join_lines(suffix, true));
  if (regions.empty()) return out;
  for (const javasrc::CatchClause& c : regions.front().catches) out.insert(out.end(), c.types.begin(), c.types.end());
  return out;
}

inline Patch make_patch(const planner::CodeUnit& unit, const PatchTarget& target, const std::string& suffix_text,
                        std::vector<std::string> caught) {
  Patch p;
  p.unit_id = unit.id;
  p.start = target.span.start;
  p.end = target.span.end;
  const std::string indent = javasrc::indentation(unit.line(p.start));
  p.prefix = {indent + "try {"};
  p.suffix = format_suffix(suffix_text, indent);
  p.caught = std::move(caught);
  p.segments = target.segments;
  return p;
}

/// One try per target, catches ordered most specific first. The handler
/// prompt's reply is used when it wraps the span unchanged and validates;
/// otherwise the catch clauses come from the CEE templates.
inline GenerateResult generate(const planner::CodeUnit& unit, const std::vector<PatchTarget>& targets,
                               const cee::CeeTree& tree, llm::CompletionBackend& backend, int retries = 2) {
  if (targets.empty()) throw Error(ErrorCode::precondition, "nothing selected for handling");
  GenerateResult result;
  for (const PatchTarget& target : targets) {
    if (target.types.empty()) throw Error(ErrorCode::precondition, "no exception selected for " + span_string(target.span));
    const std::vector<std::string> types = order_catches(target.types, tree);
    json strategies = json::array();
    std::string template_suffix = "}";
    for (const std::string& t : types) {
      const cee::HandlingStrategy s = tree.strategy_of(t);
      if (s.handle_code.empty()) throw Error(ErrorCode::no_strategy, "no handling template for " + t);
      strategies.push_back({{"ExceptionType", t}, {"HandleLogic", s.handle_logic}, {"Template", s.handle_code}});
      template_suffix += llm::mock::catch_tail(s.handle_code);
    }
    std::vector<std::string> wrapped;
    for (int l = target.span.start; l <= target.span.end; ++l) wrapped.push_back(unit.line(l));

    std::optional<Patch> chosen;
    try {
      const std::string prompt = llm::render(
          "handler", {{"code_unit", javasrc::join_lines(wrapped, false)}, {"strategy1", strategies.dump(2)}});
      const llm::Completion c = llm::complete_structured(backend, "handler", prompt, retries);
      if (auto suffix = parse_handler_reply(c.payload->at("optimized_code").get<std::string>(), wrapped)) {
        Patch p = make_patch(unit, target, *suffix, {});
        p.caught = caught_types(p.suffix);
        if (validate(apply(unit, {p}), tree).empty()) chosen = std::move(p);
      }
    } catch (const Error&) {
    }
    if (!chosen) {
      chosen = make_patch(unit, target, template_suffix, types);
      chosen->degraded = true;
      ++result.degraded_calls;
    }
    result.patches.push_back(std::move(*chosen));
  }
  return result;
}

inline json to_json(const Patch& p) {
  return {{"unit", p.unit_id},    {"span", {p.start, p.end}}, {"caught", p.caught},
          {"segments", p.segments}, {"prefix", p.prefix},      {"suffix", p.suffix},
          {"degraded", p.degraded}};
}

}  // namespace exguard::handler
