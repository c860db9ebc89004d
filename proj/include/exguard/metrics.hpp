// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Evaluation metrics: coverage, exact-span coverage-pass, subclass-aware
// accuracy, edit similarity, weighted review score and judged pass rate.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/gateway.hpp"
#include "exguard/javasrc.hpp"
#include "exguard/mock_backend.hpp"
#include "exguard/work_pool.hpp"

namespace exguard::metrics {

using json = nlohmann::json;

struct Span {
  int start = 0;
  int end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

inline std::string to_string(const Span& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + "]";
}

/// Unit-cost edit distance over bytes, two-row table.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Trailing whitespace stripped from every line, runs of blank lines
/// collapsed to one, leading and trailing blank lines dropped.
inline std::string normalize_code(std::string_view text) {
  std::vector<std::string> kept;
  bool last_blank = true;
  for (const std::string& raw : javasrc::split_lines(text)) {
    std::string line = raw;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    const bool blank = line.empty();
    if (blank && last_blank) continue;
    kept.push_back(std::move(line));
    last_blank = blank;
  }
  while (!kept.empty() && kept.back().empty()) kept.pop_back();
  return javasrc::join_lines(kept, false);
}

struct EditScore {
  std::size_t distance = 0;
  std::size_t longer = 0;
  bool both_empty = false;

  double value() const {
    if (longer == 0) return 1.0;
    return static_cast<double>(longer - distance) / static_cast<double>(longer);
  }
};

inline EditScore edit_score(std::string_view generated, std::string_view reference, bool raw = false) {
  std::string g(generated), a(reference);
  if (!raw) {
    g = normalize_code(g);
    a = normalize_code(a);
  }
  EditScore s;
  s.distance = levenshtein(g, a);
  s.longer = std::max(g.size(), a.size());
  s.both_empty = s.longer == 0;
  return s;
}

inline double edit_similarity(std::string_view generated, std::string_view reference, bool raw = false) {
  return edit_score(generated, reference, raw).value();
}

inline std::optional<double> percent(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

struct SpanCounts {
  std::size_t matched = 0;  // COV: actual spans found; COV-P: TP
  std::size_t actual = 0;   // |S| or P
  std::size_t detected = 0; // |D| or |T-hat|
};

inline SpanCounts count_spans(const std::vector<Span>& actual, const std::vector<Span>& detected) {
  const std::set<Span> a(actual.begin(), actual.end());
  const std::set<Span> d(detected.begin(), detected.end());
  SpanCounts c;
  c.actual = a.size();
  c.detected = d.size();
  for (const Span& s : a) c.matched += d.count(s);
  return c;
}

inline std::optional<double> cov(const std::vector<Span>& actual, const std::vector<Span>& detected) {
  const SpanCounts c = count_spans(actual, detected);
  return percent(c.matched, c.actual);
}

inline std::optional<double> cov_p_from(const SpanCounts& c) {
  if (c.actual == 0) return std::nullopt;
  const std::size_t fp = c.detected - c.matched;
  return percent(c.matched, c.actual + fp);
}

inline std::optional<double> cov_p(const std::vector<Span>& actual, const std::vector<Span>& detected) {
  return cov_p_from(count_spans(actual, detected));
}

/// A detected type is correct when it equals an actual type or is a
/// subclass of one. Unknown detected names only match themselves.
inline bool type_correct(const std::string& detected, const std::set<std::string>& actual, const cee::CeeTree& tree) {
  if (actual.count(detected)) return true;
  if (!tree.contains(detected)) return false;
  for (const std::string& e : actual) {
    if (tree.contains(e) && tree.is_subtype(detected, e)) return true;
  }
  return false;
}

inline std::size_t count_correct(const std::set<std::string>& actual, const std::set<std::string>& detected,
                                 const cee::CeeTree& tree) {
  std::size_t n = 0;
  for (const std::string& t : detected) n += type_correct(t, actual, tree) ? 1 : 0;
  return n;
}

inline std::optional<double> acc(const std::set<std::string>& actual, const std::set<std::string>& detected,
                                 const cee::CeeTree& tree) {
  return percent(count_correct(actual, detected, tree), detected.size());
}

struct AcrsRule {
  std::string id;
  double weight = 1.0;
  double q = 0.0;
  double max = 1.0;
};

inline double acrs(const std::vector<AcrsRule>& rules) {
  if (rules.empty()) throw Error(ErrorCode::precondition, "review score needs at least one rule");
  double num = 0.0, den = 0.0;
  for (const AcrsRule& r : rules) {
    if (!(r.weight > 0.0)) throw Error(ErrorCode::precondition, "rule " + r.id + " needs weight > 0");
    if (!(r.max > 0.0) || r.q < 0.0 || r.q > r.max) {
      throw Error(ErrorCode::precondition, "rule " + r.id + " needs 0 <= q <= Q and Q > 0");
    }
    num += r.weight * (r.q / r.max);
    den += r.weight;
  }
  return num / den;
}

inline std::optional<double> crs(std::size_t good, std::size_t total) { return percent(good, total); }

// ---------------------------------------------------------------------------
// Review rules. Each rule counts applicable items (Q) and passing ones (q)
// in a generated try-catch block.

struct RuleSpec {
  std::string id;
  double weight = 1.0;
};

inline const std::vector<std::string>& rule_ids() {
  static const std::vector<std::string> ids = {"specific-catch", "non-empty-catch", "catch-order",
                                               "logging",        "no-swallowed-rethrow", "brace-balance"};
  return ids;
}

inline std::vector<RuleSpec> default_rules() {
  return {{"specific-catch", 3}, {"non-empty-catch", 2}, {"catch-order", 2},
          {"logging", 1},        {"no-swallowed-rethrow", 1}, {"brace-balance", 1}};
}

inline void check_rules(const std::vector<RuleSpec>& rules) {
  if (rules.empty()) throw Error(ErrorCode::config, "rule table is empty");
  std::set<std::string> seen;
  for (const RuleSpec& r : rules) {
    if (std::find(rule_ids().begin(), rule_ids().end(), r.id) == rule_ids().end()) {
      throw Error(ErrorCode::config, "unknown review rule '" + r.id + "'");
    }
    if (!seen.insert(r.id).second) throw Error(ErrorCode::config, "review rule '" + r.id + "' listed twice");
    if (!(r.weight > 0.0)) throw Error(ErrorCode::config, "review rule '" + r.id + "' needs weight > 0");
  }
}

struct Tally {
  std::size_t q = 0;
  std::size_t max = 0;

  Tally& operator+=(const Tally& o) {
    q += o.q;
    max += o.max;
    return *this;
  }
};

using Tallies = std::map<std::string, Tally>;

namespace detail {

inline bool logs(const std::string& body) {
  static const std::regex re(
      R"(printStackTrace\s*\(|System\s*\.\s*(err|out)\s*\.\s*print|\b(log|logger|LOG|LOGGER|Log)\s*\.\s*\w+\s*\()");
  return std::regex_search(javasrc::mask(body), re) || std::regex_search(body, re);
}

// `throw new X(args)` statements whose argument list never names the
// caught variable; a rethrow like `throw e;` is not counted.
inline std::pair<std::size_t, std::size_t> rethrows(const std::string& body, const std::string& variable) {
  static const std::regex re(R"(\bthrow\s+new\s+[\w.]+\s*\(([^;]*)\)\s*;)");
  std::size_t total = 0, keep = 0;
  const std::string masked = javasrc::mask(body);
  for (auto it = std::sregex_iterator(masked.begin(), masked.end(), re); it != std::sregex_iterator(); ++it) {
    ++total;
    const std::string args = (*it)[1].str();
    for (const javasrc::Identifier& id : javasrc::identifiers(args)) {
      if (!variable.empty() && id.text == variable) {
        ++keep;
        break;
      }
    }
  }
  return {keep, total};
}

}  // namespace detail

inline Tallies review_block(const std::string& block, const cee::CeeTree& tree) {
  Tallies t;
  for (const std::string& id : rule_ids()) t[id];
  const javasrc::BraceProfile profile = javasrc::brace_profile(block);
  t["brace-balance"] += {profile.final_depth == 0 && profile.first_negative_line == 0 ? 1u : 0u, 1u};
  const std::vector<std::string> lines = javasrc::split_lines(block);
  for (const javasrc::TryRegion& r : javasrc::scan_try_blocks(block)) {
    std::string body;
    for (int l = r.body_open_line; l <= r.body_close_line && l <= static_cast<int>(lines.size()); ++l) {
      body += lines[l - 1] + "\n";
    }
    const bool specific_available = !cee::api_hits(tree, body).empty();
    std::vector<std::string> earlier;
    bool ordered = true;
    for (const javasrc::CatchClause& c : r.catches) {
      bool broad = false;
      for (const std::string& type : c.types) {
        broad = broad || type == "Exception" || type == "Throwable";
        for (const std::string& e : earlier) {
          if (type != e && cee::is_same_or_subtype(tree, type, e)) ordered = false;
        }
      }
      earlier.insert(earlier.end(), c.types.begin(), c.types.end());
      t["specific-catch"] += {!broad || !specific_available ? 1u : 0u, 1u};
      t["non-empty-catch"] += {c.body_empty ? 0u : 1u, 1u};
      t["logging"] += {detail::logs(c.body) ? 1u : 0u, 1u};
      const auto [keep, total] = detail::rethrows(c.body, c.variable);
      t["no-swallowed-rethrow"] += {keep, total};
    }
    t["catch-order"] += {ordered ? 1u : 0u, 1u};
  }
  return t;
}

/// Rules with at least one applicable item; empty when nothing applies.
inline std::vector<AcrsRule> acrs_rules(const Tallies& tallies, const std::vector<RuleSpec>& rules) {
  std::vector<AcrsRule> out;
  for (const RuleSpec& r : rules) {
    auto it = tallies.find(r.id);
    if (it == tallies.end() || it->second.max == 0) continue;
    out.push_back({r.id, r.weight, static_cast<double>(it->second.q), static_cast<double>(it->second.max)});
  }
  return out;
}

inline std::optional<double> acrs_of(const Tallies& tallies, const std::vector<RuleSpec>& rules) {
  const std::vector<AcrsRule> applicable = acrs_rules(tallies, rules);
  if (applicable.empty()) return std::nullopt;
  return acrs(applicable);
}

struct Verdict {
  bool good = false;
  std::string reason;
  bool degraded = false;
};

inline Verdict judge(const std::string& block, const cee::CeeTree& tree, llm::CompletionBackend& backend,
                     int retries = 2) {
  try {
    const llm::Completion c =
        llm::complete_structured(backend, "judge", llm::render("judge", {{"block", block}}), retries);
    const std::string v = javasrc::to_lower(javasrc::trim(c.payload->at("verdict").get<std::string>()));
    if (v == "good" || v == "bad") return {v == "good", c.payload->value("reason", std::string()), false};
  } catch (const Error&) {
  }
  const auto [good, reason] = llm::mock::review(tree, block);
  return {good, reason, true};
}

// ---------------------------------------------------------------------------
// Ground truth, detections and corpus evaluation.

struct GroundTruth {
  std::string name;  // file name relative to the corpus root
  std::vector<Span> sensitive;
  std::vector<Span> try_spans;
  std::set<std::string> types;
  std::optional<std::string> reference;  // handled source text
  std::vector<std::string> unknown_types;
};

struct Detections {
  std::string name;
  std::vector<Span> segments;
  std::vector<Span> try_spans;
  std::set<std::string> types;
  std::string generated;            // whole patched file
  std::vector<std::string> blocks;  // one generated try-catch block per patch
};

inline std::string sidecar_path(const std::string& java_path) {
  std::filesystem::path p(java_path);
  p.replace_extension(".expect.json");
  return p.string();
}

namespace detail {

inline std::vector<Span> parse_spans(const json& j, const std::string& field, int line_count,
                                     const std::string& origin) {
  std::vector<Span> out;
  if (!j.contains(field)) return out;
  if (!j.at(field).is_array()) throw Error(ErrorCode::parse, origin + ": '" + field + "' must be an array");
  for (const json& s : j.at(field)) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() || !s[1].is_number_integer()) {
      throw Error(ErrorCode::parse, origin + ": '" + field + "' entries must be [start, end]");
    }
    Span span{s[0].get<int>(), s[1].get<int>()};
    if (span.start < 1 || span.end < span.start || span.end > line_count) {
      throw Error(ErrorCode::parse, origin + ": span " + to_string(span) + " outside the file");
    }
    out.push_back(span);
  }
  return out;
}

}  // namespace detail

/// Reads `<name>.expect.json` beside `java_path`.
inline GroundTruth load_ground_truth(const std::string& java_path, const std::string& name, const cee::CeeTree& tree) {
  const std::string side = sidecar_path(java_path);
  if (!std::filesystem::exists(side)) throw Error(ErrorCode::io, "missing sidecar " + side);
  const json j = cee::parse_json_text(cee::read_file(side), side);
  if (!j.is_object()) throw Error(ErrorCode::parse, side + ": expected an object");
  const int line_count = static_cast<int>(javasrc::split_lines(cee::read_file(java_path)).size());
  GroundTruth g;
  g.name = name;
  g.sensitive = detail::parse_spans(j, "sensitive_spans", line_count, side);
  g.try_spans = detail::parse_spans(j, "try_spans", line_count, side);
  for (const json& t : j.value("exception_types", json::array())) {
    if (!t.is_string()) throw Error(ErrorCode::parse, side + ": exception_types must be strings");
    g.types.insert(t.get<std::string>());
    if (!tree.contains(t.get<std::string>())) g.unknown_types.push_back(t.get<std::string>());
  }
  if (j.contains("reference_path") && !j.at("reference_path").is_null()) {
    const std::filesystem::path ref =
        std::filesystem::path(side).parent_path() / j.at("reference_path").get<std::string>();
    g.reference = cee::read_file(ref.string());
  }
  return g;
}

struct FileReport {
  std::string name;
  SpanCounts segments;
  SpanCounts tries;
  std::size_t types_correct = 0;
  std::size_t types_detected = 0;
  std::optional<EditScore> edit;
  Tallies tallies;
  std::size_t good = 0;
  std::size_t blocks = 0;
  std::size_t degraded = 0;
  std::vector<std::string> unknown_types;
};

struct EvaluationReport {
  std::optional<double> acrs, cov, cov_p, acc, es, crs;
  std::size_t tp = 0, fp = 0, fn = 0, p = 0, q = 0;
  std::size_t n_good = 0, n_total = 0;
  std::size_t degraded_calls = 0;
  std::vector<FileReport> files;
  std::vector<RuleSpec> rules;
};

inline std::optional<double> file_acc(const FileReport& f) { return percent(f.types_correct, f.types_detected); }

inline FileReport evaluate_file(const GroundTruth& truth, const Detections& det, const cee::CeeTree& tree,
                                llm::CompletionBackend& backend, int workers) {
  FileReport f;
  f.name = truth.name;
  f.segments = count_spans(truth.sensitive, det.segments);
  f.tries = count_spans(truth.try_spans, det.try_spans);
  f.types_detected = det.types.size();
  f.types_correct = count_correct(truth.types, det.types, tree);
  if (truth.reference) f.edit = edit_score(det.generated, *truth.reference);
  for (const std::string& id : rule_ids()) f.tallies[id];
  for (const std::string& b : det.blocks) {
    for (const auto& [id, t] : review_block(b, tree)) f.tallies[id] += t;
  }
  const std::vector<Verdict> verdicts =
      parallel_map(det.blocks, workers, [&](const std::string& b) { return judge(b, tree, backend); });
  for (const Verdict& v : verdicts) {
    f.good += v.good ? 1 : 0;
    f.degraded += v.degraded ? 1 : 0;
  }
  f.blocks = verdicts.size();
  f.unknown_types = truth.unknown_types;
  return f;
}

/// Pools counts over all files before applying each formula.
inline EvaluationReport evaluate(const std::vector<GroundTruth>& truth, const std::vector<Detections>& detections,
                                 const cee::CeeTree& tree, const std::vector<RuleSpec>& rules,
                                 llm::CompletionBackend& backend, int workers = 1) {
  check_rules(rules);
  std::map<std::string, const Detections*> by_name;
  for (const Detections& d : detections) by_name[d.name] = &d;
  std::set<std::string> truth_names;
  std::vector<std::string> missing;
  for (const GroundTruth& g : truth) {
    truth_names.insert(g.name);
    if (!by_name.count(g.name)) missing.push_back("no detections for " + g.name);
  }
  for (const auto& [name, d] : by_name) {
    if (!truth_names.count(name)) missing.push_back("no ground truth for " + name);
  }
  if (!missing.empty()) throw Error(ErrorCode::key_mismatch, llm::mock::join(missing, "; "));

  EvaluationReport r;
  r.rules = rules;
  SpanCounts seg, tries;
  std::size_t correct = 0, detected = 0, distance = 0, longer = 0, edits = 0;
  Tallies pooled;
  std::vector<GroundTruth> ordered = truth;
  std::sort(ordered.begin(), ordered.end(), [](const GroundTruth& a, const GroundTruth& b) { return a.name < b.name; });
  for (const GroundTruth& g : ordered) {
    FileReport f = evaluate_file(g, *by_name.at(g.name), tree, backend, workers);
    seg.matched += f.segments.matched;
    seg.actual += f.segments.actual;
    seg.detected += f.segments.detected;
    tries.matched += f.tries.matched;
    tries.actual += f.tries.actual;
    tries.detected += f.tries.detected;
    correct += f.types_correct;
    detected += f.types_detected;
    if (f.edit) {
      distance += f.edit->distance;
      longer += f.edit->longer;
      ++edits;
    }
    for (const auto& [id, t] : f.tallies) pooled[id] += t;
    r.n_good += f.good;
    r.n_total += f.blocks;
    r.degraded_calls += f.degraded;
    r.files.push_back(std::move(f));
  }
  r.cov = percent(seg.matched, seg.actual);
  r.cov_p = cov_p_from(tries);
  r.acc = percent(correct, detected);
  if (edits > 0) r.es = EditScore{distance, longer, longer == 0}.value();
  r.acrs = acrs_of(pooled, rules);
  r.crs = crs(r.n_good, r.n_total);
  r.tp = tries.matched;
  r.p = tries.actual;
  r.q = tries.detected;
  r.fp = tries.detected - tries.matched;
  r.fn = tries.actual - tries.matched;
  return r;
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const FileReport& f, const std::vector<RuleSpec>& rules) {
  json tallies = json::object();
  for (const auto& [id, t] : f.tallies) tallies[id] = {{"q", t.q}, {"max", t.max}};
  return {{"file", f.name},
          {"cov", opt_json(percent(f.segments.matched, f.segments.actual))},
          {"cov_p", opt_json(cov_p_from(f.tries))},
          {"acc", opt_json(file_acc(f))},
          {"es", f.edit ? json(f.edit->value()) : json(nullptr)},
          {"acrs", opt_json(acrs_of(f.tallies, rules))},
          {"crs", opt_json(crs(f.good, f.blocks))},
          {"segments", {{"actual", f.segments.actual}, {"detected", f.segments.detected}, {"matched", f.segments.matched}}},
          {"try_spans", {{"p", f.tries.actual}, {"detected", f.tries.detected}, {"tp", f.tries.matched}}},
          {"types", {{"detected", f.types_detected}, {"correct", f.types_correct}}},
          {"review", tallies},
          {"judged", {{"good", f.good}, {"total", f.blocks}, {"degraded", f.degraded}}},
          {"unknown_types", f.unknown_types}};
}

/// Mean of the per-file values that are defined.
inline json macro_average(const EvaluationReport& r) {
  auto mean = [&](auto get) -> json {
    double sum = 0.0;
    int n = 0;
    for (const FileReport& f : r.files) {
      if (const std::optional<double> v = get(f)) {
        sum += *v;
        ++n;
      }
    }
    return n ? json(sum / n) : json(nullptr);
  };
  return {{"cov", mean([](const FileReport& f) { return percent(f.segments.matched, f.segments.actual); })},
          {"cov_p", mean([](const FileReport& f) { return cov_p_from(f.tries); })},
          {"acc", mean([](const FileReport& f) { return file_acc(f); })},
          {"es", mean([](const FileReport& f) {
             return f.edit ? std::optional<double>(f.edit->value()) : std::nullopt;
           })},
          {"acrs", mean([&](const FileReport& f) { return acrs_of(f.tallies, r.rules); })},
          {"crs", mean([](const FileReport& f) { return crs(f.good, f.blocks); })}};
}

inline json to_json(const EvaluationReport& r) {
  json files = json::array();
  for (const FileReport& f : r.files) files.push_back(to_json(f, r.rules));
  json rules = json::array();
  for (const RuleSpec& s : r.rules) rules.push_back({{"id", s.id}, {"weight", s.weight}});
  return {{"acrs", opt_json(r.acrs)},
          {"cov", opt_json(r.cov)},
          {"cov_p", opt_json(r.cov_p)},
          {"acc", opt_json(r.acc)},
          {"es", opt_json(r.es)},
          {"crs", opt_json(r.crs)},
          {"counts",
           {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"p", r.p}, {"q", r.q}, {"n_good", r.n_good},
            {"n_total", r.n_total}}},
          {"degraded_calls", r.degraded_calls},
          {"rules", rules},
          {"macro", macro_average(r)},
          {"files", files}};
}

inline std::string format_value(const std::optional<double>& v, bool pct) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, pct ? "%.1f%%" : "%.3f", *v);
  return buf;
}

inline std::string render_table(const EvaluationReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %8s %8s %8s %8s %8s %8s\n", "file", "ACRS", "COV", "COV-P", "ACC", "ES", "CRS");
  out += buf;
  auto row = [&](const std::string& name, const std::optional<double>& a, const std::optional<double>& c,
                 const std::optional<double>& cp, const std::optional<double>& ac, const std::optional<double>& es,
                 const std::optional<double>& cr) {
    std::snprintf(buf, sizeof buf, "%-28s %8s %8s %8s %8s %8s %8s\n", name.c_str(), format_value(a, false).c_str(),
                  format_value(c, true).c_str(), format_value(cp, true).c_str(), format_value(ac, true).c_str(),
                  format_value(es, false).c_str(), format_value(cr, true).c_str());
    out += buf;
  };
  for (const FileReport& f : r.files) {
    row(f.name, acrs_of(f.tallies, r.rules), percent(f.segments.matched, f.segments.actual), cov_p_from(f.tries),
        file_acc(f), f.edit ? std::optional<double>(f.edit->value()) : std::nullopt, crs(f.good, f.blocks));
  }
  row("(corpus)", r.acrs, r.cov, r.cov_p, r.acc, r.es, r.crs);
  return out;
}

}  // namespace exguard::metrics
