// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Fragile-span detection: exception sites routed through enclosing try
// statements (static arm), plus line labeling by the scenario and property
// prompts (matching arm).

#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/cfg.hpp"
#include "exguard/gateway.hpp"
#include "exguard/planner.hpp"

namespace exguard::detector {

enum class SiteOrigin { throw_stmt, throws_clause, api_call };

inline std::string_view to_string(SiteOrigin o) {
  switch (o) {
    case SiteOrigin::throw_stmt: return "throw-stmt";
    case SiteOrigin::throws_clause: return "throws-clause";
    case SiteOrigin::api_call: return "api-call";
  }
  return "api-call";
}

struct Site {
  int line = 0;
  std::string type;
  SiteOrigin origin = SiteOrigin::api_call;
  std::string keyword;  // api-call: the matched call, e.g. "Files.size"
  std::size_t offset = 0;
};

enum class Target { catch_clause, unit_exit, declared };

struct Propagation {
  std::size_t site = 0;
  Target target = Target::unit_exit;
  int catch_line = 0;
  std::string catch_type;
};

struct Epg {
  std::vector<Site> sites;
  std::vector<Propagation> edges;  // one per site, same order

  bool unhandled(std::size_t site) const { return edges.at(site).target == Target::unit_exit; }
};

/// Whether a `catch (handler ...)` clause catches `type`.
inline bool catches(const cee::CeeTree& tree, const std::string& type, const std::string& handler) {
  if (handler == "Throwable") return true;
  if (handler == "Exception" && !tree.contains(type)) return true;
  return cee::is_same_or_subtype(tree, type, handler);
}

struct TryScope {
  std::size_t begin = 0;  // offset of the try body '{'
  std::size_t end = 0;    // offset of its '}'
  int open_line = 0;
  int close_line = 0;
  std::vector<cfg::CatchInfo> catches;
};

inline std::vector<TryScope> try_scopes(const std::vector<cfg::Stmt>& program) {
  std::vector<TryScope> out;
  cfg::walk(program, [&](const cfg::Stmt& s, int) {
    if (s.kind != cfg::StmtKind::try_ || s.bodies.empty()) return;
    const cfg::Body& b = s.bodies[0];
    out.push_back({b.open_offset, b.close_offset, b.open_line, b.close_line, s.catches});
  });
  std::sort(out.begin(), out.end(), [](const TryScope& a, const TryScope& b) { return a.begin > b.begin; });
  return out;
}

inline Epg build_epg(const planner::CodeUnit& unit, const cfg::Cfg& graph, const cee::CeeTree& tree) {
  const std::string masked = javasrc::mask(unit.text());
  const javasrc::LineIndex index(masked);
  auto line_of = [&](std::size_t off) { return index.line_of(off) + unit.start - 1; };
  Epg epg;

  for (const javasrc::CallToken& call : javasrc::call_tokens(masked)) {
    const std::string keyword = call.qualifier.empty() ? call.name : call.qualifier + "." + call.name;
    for (const std::string& owner : tree.owners_of(call)) {
      epg.sites.push_back({line_of(call.offset), owner, SiteOrigin::api_call, keyword, call.offset});
    }
  }
  const std::vector<javasrc::Identifier> ids = javasrc::identifiers(masked);
  for (std::size_t i = 0; i + 2 < ids.size(); ++i) {
    if (ids[i].text != "throw" || ids[i + 1].text != "new") continue;
    std::size_t k = i + 2;
    while (k + 1 < ids.size() && masked[ids[k].offset + ids[k].text.size()] == '.') ++k;
    epg.sites.push_back({line_of(ids[i].offset), ids[k].text, SiteOrigin::throw_stmt, {}, ids[i].offset});
  }
  cfg::walk(graph.program, [&](const cfg::Stmt& s, int) {
    if (s.kind != cfg::StmtKind::decl || s.class_like) return;
    const std::vector<javasrc::Identifier> words = javasrc::identifiers(s.header);
    bool after = false;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (words[w].text == "throws") {
        after = true;
        continue;
      }
      if (!after) continue;
      const std::size_t end = words[w].offset + words[w].text.size();
      if (end < s.header.size() && s.header[end] == '.') continue;  // package qualifier
      epg.sites.push_back({line_of(s.begin + words[w].offset), words[w].text, SiteOrigin::throws_clause, {},
                           s.begin + words[w].offset});
    }
  });
  std::stable_sort(epg.sites.begin(), epg.sites.end(), [](const Site& a, const Site& b) {
    return std::tie(a.offset, a.type) < std::tie(b.offset, b.type);
  });

  const std::vector<TryScope> scopes = try_scopes(graph.program);
  for (std::size_t i = 0; i < epg.sites.size(); ++i) {
    const Site& site = epg.sites[i];
    Propagation p{i, Target::unit_exit, 0, {}};
    if (site.origin == SiteOrigin::throws_clause) {
      p.target = Target::declared;
    } else {
      for (const TryScope& scope : scopes) {  // innermost first
        if (site.offset <= scope.begin || site.offset >= scope.end) continue;
        for (const cfg::CatchInfo& c : scope.catches) {
          for (const std::string& t : c.types) {
            if (p.target == Target::unit_exit && catches(tree, site.type, t)) {
              p.target = Target::catch_clause;
              p.catch_line = c.line;
              p.catch_type = t;
            }
          }
        }
        if (p.target != Target::unit_exit) break;
      }
    }
    epg.edges.push_back(std::move(p));
  }
  return epg;
}

inline Epg build_epg(const planner::CodeUnit& unit, const cee::CeeTree& tree) {
  return build_epg(unit, cfg::build_cfg(unit), tree);
}

enum class Origin { static_analysis, scenario_match, property_match };

inline std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::static_analysis: return "static";
    case Origin::scenario_match: return "scenario-match";
    case Origin::property_match: return "property-match";
  }
  return "static";
}

struct SensitiveSegment {
  std::string unit_id;
  int start = 0;
  int end = 0;
  std::set<Origin> origins;
  std::set<std::string> hints;  // branch root names

  bool operator==(const SensitiveSegment&) const = default;
  std::string id() const { return unit_id + "@" + std::to_string(start) + "-" + std::to_string(end); }
};

inline void add_hint(const cee::CeeTree& tree, const std::string& type, std::set<std::string>& hints) {
  if (!tree.contains(type) || tree.node(type).depth < cee::kBranchDepth) return;
  hints.insert(tree.branch_of(type));
}

// Maximal runs of consecutive lines in `lines`.
inline std::vector<SensitiveSegment> runs(const std::string& unit_id, const std::map<int, std::set<std::string>>& lines,
                                          Origin origin) {
  std::vector<SensitiveSegment> out;
  for (const auto& [line, hints] : lines) {
    if (!out.empty() && out.back().end + 1 == line) {
      out.back().end = line;
      out.back().hints.insert(hints.begin(), hints.end());
    } else {
      out.push_back({unit_id, line, line, {origin}, hints});
    }
  }
  return out;
}

inline std::vector<SensitiveSegment> detect_static(const planner::CodeUnit& unit, const cfg::Cfg& graph,
                                                   const cee::CeeTree& tree) {
  const Epg epg = build_epg(unit, graph, tree);
  std::map<int, std::set<std::string>> lines;
  for (std::size_t i = 0; i < epg.sites.size(); ++i) {
    if (!epg.unhandled(i)) continue;
    add_hint(tree, epg.sites[i].type, lines[epg.sites[i].line]);
  }
  return runs(unit.id, lines, Origin::static_analysis);
}

inline std::vector<SensitiveSegment> detect_static(const planner::CodeUnit& unit, const cee::CeeTree& tree) {
  return detect_static(unit, cfg::build_cfg(unit), tree);
}

/// "Name: text" lines for every node at branch depth or below.
inline std::string describe_nodes(const cee::CeeTree& tree, bool property) {
  std::string out;
  for (const cee::CeeNode& n : tree.nodes()) {
    if (n.depth < cee::kBranchDepth) continue;
    const std::string& text = property ? n.property : n.scenario;
    if (text.empty()) continue;
    out += n.name + ": " + text + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

inline std::string numbered_code(const planner::CodeUnit& unit) {
  std::string out;
  for (int l = unit.start; l <= unit.end; ++l) {
    if (l > unit.start) out += "\n";
    out += std::to_string(l) + ": " + unit.line(l);
  }
  return out;
}

struct MatchResult {
  std::vector<SensitiveSegment> segments;
  int degraded_calls = 0;
  bool degraded() const { return degraded_calls > 0; }
};

inline MatchResult match_arm(const planner::CodeUnit& unit, const cee::CeeTree& tree, llm::CompletionBackend& backend,
                             bool property, int malformed_retries = 2) {
  const std::string name = property ? "detector-property" : "detector-scenario";
  const std::string prompt =
      llm::render(name, {{property ? "property" : "scenario", describe_nodes(tree, property)},
                         {"code", numbered_code(unit)}});
  MatchResult r;
  try {
    const llm::Completion c = llm::complete_structured(backend, name, prompt, malformed_retries);
    std::map<int, std::set<std::string>> lines;
    for (const llm::json& row : c.payload->at("code_with_label")) {
      if (!row.at("line").is_number_integer()) continue;
      const int line = row.at("line").get<int>();
      if (!unit.contains(line)) continue;
      std::set<std::string> hints;
      for (const llm::json& label : row.at("labels")) {
        if (label.is_string()) add_hint(tree, label.get<std::string>(), hints);
      }
      if (!hints.empty()) lines[line].insert(hints.begin(), hints.end());
    }
    r.segments = runs(unit.id, lines, property ? Origin::property_match : Origin::scenario_match);
  } catch (const Error&) {
    r.degraded_calls = 1;
  }
  return r;
}

/// Both matching prompts, issued concurrently; their segments are returned
/// unmerged (scenario arm first).
inline MatchResult detect_match(const planner::CodeUnit& unit, const cee::CeeTree& tree,
                                llm::CompletionBackend& backend, int malformed_retries = 2) {
  auto property = std::async(std::launch::async, [&] { return match_arm(unit, tree, backend, true, malformed_retries); });
  MatchResult out = match_arm(unit, tree, backend, false, malformed_retries);
  MatchResult p = property.get();
  out.segments.insert(out.segments.end(), p.segments.begin(), p.segments.end());
  out.degraded_calls += p.degraded_calls;
  return out;
}

/// Union of spans: overlapping spans, or spans separated by at most one
/// line, coalesce; origins and hints are unioned; output sorted by start.
inline std::vector<SensitiveSegment> merge(const std::vector<SensitiveSegment>& a,
                                           const std::vector<SensitiveSegment>& b) {
  std::vector<SensitiveSegment> all(a);
  all.insert(all.end(), b.begin(), b.end());
  for (const SensitiveSegment& s : all) {
    if (s.unit_id != all.front().unit_id) {
      throw Error(ErrorCode::mixed_unit, "cannot merge segments of '" + all.front().unit_id + "' and '" + s.unit_id + "'");
    }
  }
  std::sort(all.begin(), all.end(),
            [](const SensitiveSegment& x, const SensitiveSegment& y) { return std::tie(x.start, x.end) < std::tie(y.start, y.end); });
  std::vector<SensitiveSegment> out;
  for (const SensitiveSegment& s : all) {
    if (!out.empty() && s.start <= out.back().end + 2) {
      SensitiveSegment& t = out.back();
      t.end = std::max(t.end, s.end);
      t.origins.insert(s.origins.begin(), s.origins.end());
      t.hints.insert(s.hints.begin(), s.hints.end());
    } else {
      out.push_back(s);
    }
  }
  return out;
}

/// Drops segments lying wholly inside an existing try body whose catches
/// already cover every hinted branch.
inline std::vector<SensitiveSegment> drop_guarded(const std::vector<SensitiveSegment>& segments,
                                                  const cfg::Cfg& graph, const cee::CeeTree& tree) {
  const std::vector<TryScope> scopes = try_scopes(graph.program);
  std::vector<SensitiveSegment> out;
  for (const SensitiveSegment& s : segments) {
    bool guarded = false;
    for (const TryScope& scope : scopes) {
      if (s.start <= scope.open_line || s.end >= scope.close_line) continue;
      bool all = true;
      for (const std::string& hint : s.hints) {
        bool any = false;
        for (const cfg::CatchInfo& c : scope.catches) {
          // A hint names a branch; a catch anywhere inside it counts as handling it.
          for (const std::string& t : c.types) any = any || catches(tree, hint, t) || cee::is_same_or_subtype(tree, t, hint);
        }
        all = all && any;
      }
      if (all) guarded = true;
    }
    if (!guarded) out.push_back(s);
  }
  return out;
}

}  // namespace exguard::detector
