// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end driver: configuration, the phased analyze run, corpus
// evaluation, label verification and the latency bench.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/cfg.hpp"
#include "exguard/deep_rag.hpp"
#include "exguard/detector.hpp"
#include "exguard/gateway.hpp"
#include "exguard/handler.hpp"
#include "exguard/metrics.hpp"
#include "exguard/mock_backend.hpp"
#include "exguard/planner.hpp"
#include "exguard/ranker.hpp"
#include "exguard/work_pool.hpp"

namespace exguard::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string default_cee_path() {
#ifdef EXGUARD_DATA_DIR
  return std::string(EXGUARD_DATA_DIR) + "/cee.json";
#else
  return "data/cee.json";
#endif
}

struct PipelineConfig {
  std::string cee_path = default_cee_path();
  std::string labels_path;  // empty: labels are generated at run start
  std::string output_dir = "exguard-out";
  ranker::RankConfig rank;
  rag::RagConfig rag;
  int segment_limit = planner::kDefaultLimit;
  llm::BackendConfig backend;
  int workers = 8;
  int malformed_retries = 2;
  std::vector<metrics::RuleSpec> rules = metrics::default_rules();
  bool live = false;

  void validate() const {
    rank.validate();
    rag.validate();
    backend.validate();
    metrics::check_rules(rules);
    if (segment_limit < 1) throw Error(ErrorCode::config, "planner.limit must be >= 1");
    if (workers < 1) throw Error(ErrorCode::config, "run.workers must be >= 1");
    if (malformed_retries < 0) throw Error(ErrorCode::config, "run.malformed_retries must be >= 0");
    if (output_dir.empty()) throw Error(ErrorCode::config, "run.output_dir is empty");
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config, key + ": '" + v + "' is not a number");
}

inline int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config, key + ": '" + v + "' is not an integer");
}

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

}  // namespace detail

inline const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = {
      "cee.path",         "rag.labels",       "rag.theta",           "rag.delta",       "rag.max_depth",
      "rank.alpha",       "rank.beta",        "rank.gamma",          "planner.limit",   "backend.endpoint",
      "backend.model",    "backend.timeout",  "backend.retries",     "backend.backoff", "backend.max_in_flight",
      "backend.api_key_env", "run.workers",   "run.output_dir",      "run.malformed_retries"};
  return keys;
}

/// One `section.key = value` assignment. Rule weights live under
/// `rules.<id>`; a weight of 0 drops the rule.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  using detail::to_double;
  using detail::to_int;
  if (key == "cee.path") c.cee_path = value;
  else if (key == "rag.labels") c.labels_path = value;
  else if (key == "rag.theta") c.rag.theta = to_double(key, value);
  else if (key == "rag.delta") c.rag.delta = to_double(key, value);
  else if (key == "rag.max_depth") c.rag.max_depth = to_int(key, value);
  else if (key == "rank.alpha") c.rank.alpha = to_double(key, value);
  else if (key == "rank.beta") c.rank.beta = to_double(key, value);
  else if (key == "rank.gamma") c.rank.gamma = to_double(key, value);
  else if (key == "planner.limit") c.segment_limit = to_int(key, value);
  else if (key == "backend.endpoint") c.backend.endpoint = value;
  else if (key == "backend.model") c.backend.model = value;
  else if (key == "backend.timeout") c.backend.timeout_s = to_double(key, value);
  else if (key == "backend.retries") c.backend.max_retries = to_int(key, value);
  else if (key == "backend.backoff") c.backend.backoff_base_s = to_double(key, value);
  else if (key == "backend.max_in_flight") c.backend.max_in_flight = to_int(key, value);
  else if (key == "backend.api_key_env") c.backend.api_key_env = value;
  else if (key == "run.workers") c.workers = to_int(key, value);
  else if (key == "run.output_dir") c.output_dir = value;
  else if (key == "run.malformed_retries") c.malformed_retries = to_int(key, value);
  else if (key.rfind("rules.", 0) == 0) {
    const std::string id = key.substr(6);
    if (std::find(metrics::rule_ids().begin(), metrics::rule_ids().end(), id) == metrics::rule_ids().end()) {
      throw Error(ErrorCode::config, "unknown review rule '" + id + "'");
    }
    const double w = to_double(key, value);
    if (w < 0.0) throw Error(ErrorCode::config, key + " must be >= 0");
    auto it = std::find_if(c.rules.begin(), c.rules.end(), [&](const metrics::RuleSpec& r) { return r.id == id; });
    if (w == 0.0) {
      if (it != c.rules.end()) c.rules.erase(it);
    } else if (it != c.rules.end()) {
      it->weight = w;
    } else {
      c.rules.push_back({id, w});
    }
  } else if (key == "run.live" || key == "live") {
    throw Error(ErrorCode::config, "live mode is only enabled by the --live flag");
  } else {
    throw Error(ErrorCode::config, "unknown setting '" + key + "'");
  }
}

/// `[section]` headers and `key = value` lines; `#` starts a comment.
/// Path values are resolved against the file's directory.
inline void load_config_text(PipelineConfig& c, const std::string& text, const std::string& origin,
                             const fs::path& base_dir = {}) {
  std::string section;
  int n = 0;
  for (const std::string& raw : javasrc::split_lines(text)) {
    ++n;
    std::string line = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = javasrc::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(n);
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::config, where + ": unterminated section header");
      section = javasrc::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::config, where + ": expected key = value");
    std::string key = javasrc::trim(line.substr(0, eq));
    const std::string value = detail::unquote(javasrc::trim(line.substr(eq + 1)));
    if (!section.empty()) key = section + "." + key;
    const bool is_path = key == "cee.path" || key == "rag.labels" || key == "run.output_dir";
    try {
      apply_setting(c, key, is_path && !base_dir.empty() && fs::path(value).is_relative()
                                ? (base_dir / value).lexically_normal().string()
                                : value);
    } catch (const Error& e) {
      throw Error(ErrorCode::config, where + ": " + e.what());
    }
  }
}

inline void load_config_file(PipelineConfig& c, const std::string& path) {
  std::string text;
  try {
    text = cee::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::config, std::string("cannot read config: ") + e.what());
  }
  load_config_text(c, text, path, fs::path(path).parent_path());
}

inline json to_json(const PipelineConfig& c) {
  json rules = json::object();
  for (const metrics::RuleSpec& r : c.rules) rules[r.id] = r.weight;
  return {{"rank", {{"alpha", c.rank.alpha}, {"beta", c.rank.beta}, {"gamma", c.rank.gamma}}},
          {"rag", {{"theta", c.rag.theta}, {"delta", c.rag.delta}, {"max_depth", c.rag.max_depth}}},
          {"planner", {{"limit", c.segment_limit}}},
          {"rules", rules},
          {"mode", c.live ? "live" : "mock"}};
}

// ---------------------------------------------------------------------------
// Backend wiring.

/// Counts calls and failed calls of the wrapped backend.
class CountingBackend final : public llm::CompletionBackend {
 public:
  explicit CountingBackend(std::shared_ptr<llm::CompletionBackend> inner) : inner_(std::move(inner)) {}

  llm::Completion complete(const std::string& prompt) override {
    ++calls_;
    try {
      return inner_->complete(prompt);
    } catch (...) {
      ++failures_;
      throw;
    }
  }

  bool is_mock() const override { return inner_->is_mock(); }
  long calls() const { return calls_.load(); }
  long failures() const { return failures_.load(); }

 private:
  std::shared_ptr<llm::CompletionBackend> inner_;
  std::atomic<long> calls_{0};
  std::atomic<long> failures_{0};
};

// ---------------------------------------------------------------------------
// Analyze.

struct SourceInput {
  std::string name;  // relative to the input root; used in unit ids
  std::string path;
};

/// `.java` files under `root` (or `root` itself), sorted by relative name.
/// Anything inside `exclude` is skipped.
inline std::vector<SourceInput> find_sources(const std::string& root, const std::string& exclude = {}) {
  const fs::path r(root);
  if (!fs::exists(r)) throw Error(ErrorCode::io, "input path does not exist: " + root);
  std::vector<SourceInput> out;
  if (fs::is_regular_file(r)) {
    if (r.extension() != ".java") throw Error(ErrorCode::io, root + " is not a .java file");
    out.push_back({r.filename().string(), r.string()});
    return out;
  }
  const fs::path skip = exclude.empty() ? fs::path() : fs::weakly_canonical(exclude);
  for (auto it = fs::recursive_directory_iterator(r); it != fs::recursive_directory_iterator(); ++it) {
    if (!skip.empty() && it->is_directory() && fs::weakly_canonical(it->path()) == skip) {
      it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file() || it->path().extension() != ".java") continue;
    out.push_back({fs::relative(it->path(), r).generic_string(), it->path().string()});
  }
  std::sort(out.begin(), out.end(), [](const SourceInput& a, const SourceInput& b) { return a.name < b.name; });
  if (out.empty()) throw Error(ErrorCode::io, "no .java files under " + root);
  return out;
}

struct BranchPrediction {
  std::string branch;
  std::vector<std::string> types;
  bool degraded = false;
};

inline std::string branch_listing(const cee::CeeTree& tree, const std::string& branch) {
  return branch + ": " + llm::mock::join(tree.branch_members(branch), ", ");
}

/// One predator prompt for one activated branch; reply types outside the
/// branch are ignored.
inline BranchPrediction predict_branch(const std::string& code, const std::string& summary, const std::string& branch,
                                       const cee::CeeTree& tree, llm::CompletionBackend& backend, int retries) {
  BranchPrediction p;
  p.branch = branch;
  const std::vector<std::string> members = tree.branch_members(branch);
  try {
    const llm::Completion c = llm::complete_structured(
        backend, "predator",
        llm::render("predator", {{"code_unit", code}, {"code_summary", summary},
                                 {"exception_branches", branch_listing(tree, branch)}}),
        retries);
    std::set<std::string> seen;
    for (const json& row : c.payload->at("ExceptionNodes")) {
      if (!row.is_object() || !row.contains("ExceptionType") || !row.at("ExceptionType").is_string()) continue;
      const std::string t = javasrc::trim(row.at("ExceptionType").get<std::string>());
      if (std::find(members.begin(), members.end(), t) != members.end() && seen.insert(t).second) p.types.push_back(t);
    }
    std::sort(p.types.begin(), p.types.end());
  } catch (const Error&) {
    p.degraded = true;
  }
  return p;
}

struct SegmentTrace {
  detector::SensitiveSegment segment;
  std::vector<std::string> candidates;
  std::vector<ranker::RankedException> ranked;
  std::vector<std::string> selected;
  std::optional<handler::TrySpan> span;
  std::string note;
};

struct UnitResult {
  planner::CodeUnit unit;
  std::size_t file = 0;
  planner::FunctionSummary summary;
  cfg::Cfg graph;
  std::size_t static_segments = 0;
  std::size_t match_segments = 0;
  std::vector<SegmentTrace> segments;
  std::vector<rag::Query> queries;
  std::set<std::string> branches;
  std::vector<rag::Retrieval> retrievals;
  std::vector<BranchPrediction> predictions;
  std::vector<handler::Patch> patches;
  handler::OptimizedUnit optimized;
  std::vector<std::string> issues;
  std::vector<std::string> notes;
  int degraded = 0;
};

struct FileResult {
  SourceInput source;
  planner::SourceFile original;
  std::vector<std::string> patched;
  std::vector<std::size_t> units;  // indices into RunResult::units
};

struct RunResult {
  std::vector<FileResult> files;
  std::vector<UnitResult> units;  // file order, then line order
  rag::Labels labels;
  json timings;
  int degraded = 0;
  std::size_t issue_count = 0;
  long backend_calls = 0;
  long backend_failures = 0;

  bool valid() const { return issue_count == 0; }
};

namespace detail {

inline std::string segment_text(const planner::CodeUnit& unit, const detector::SensitiveSegment& s) {
  std::vector<std::string> lines;
  for (int l = s.start; l <= s.end; ++l) lines.push_back(unit.line(l));
  return javasrc::join_lines(lines, false);
}

class PhaseClock {
 public:
  explicit PhaseClock(json& out) : out_(out), t0_(std::chrono::steady_clock::now()), last_(t0_) {}

  void mark(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    out_["phases_ms"][phase] = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
  }

  void finish() {
    out_["wall_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  json& out_;
  std::chrono::steady_clock::time_point t0_, last_;
};

}  // namespace detail

struct Session {
  std::shared_ptr<const cee::CeeTree> tree;
  std::shared_ptr<CountingBackend> counter;
  std::shared_ptr<llm::BoundedBackend> backend;
};

/// Mock backend unless config.live; every call goes through one bounded,
/// counted stack.
inline Session open_session(const PipelineConfig& config, std::shared_ptr<llm::CompletionBackend> live = nullptr) {
  Session s;
  s.tree = std::make_shared<const cee::CeeTree>(cee::load_cee(config.cee_path));
  std::shared_ptr<llm::CompletionBackend> inner;
  if (config.live) {
    if (!live) throw Error(ErrorCode::config, "live mode needs a remote backend");
    inner = std::move(live);
  } else {
    inner = std::make_shared<llm::MockBackend>(s.tree);
  }
  s.counter = std::make_shared<CountingBackend>(std::move(inner));
  s.backend = std::make_shared<llm::BoundedBackend>(s.counter, config.backend.max_in_flight);
  return s;
}

inline rag::Labels session_labels(const PipelineConfig& config, const Session& s) {
  if (!config.labels_path.empty()) {
    return rag::labels_from_json(cee::parse_json_text(cee::read_file(config.labels_path), config.labels_path));
  }
  return rag::assign_labels(*s.tree, *s.backend, config.workers, config.malformed_retries);
}

/// Planner, detector, Deep-RAG retrieval with per-branch prediction,
/// ranking and handling, each phase run over all units with `workers`
/// threads. Output order never depends on scheduling.
inline RunResult analyze(const std::vector<SourceInput>& sources, const PipelineConfig& config, Session& session) {
  config.validate();
  const cee::CeeTree& tree = *session.tree;
  llm::CompletionBackend& backend = *session.backend;
  const int K = config.workers;
  const int retries = config.malformed_retries;
  RunResult run;
  detail::PhaseClock clock(run.timings);

  for (const SourceInput& src : sources) {
    FileResult f;
    f.source = src;
    const std::string text = cee::read_file(src.path);
    f.original = planner::make_source(src.name, text);
    for (planner::CodeUnit& u : planner::segment(f.original, config.segment_limit)) {
      f.units.push_back(run.units.size());
      UnitResult r;
      r.unit = std::move(u);
      r.file = run.files.size();
      run.units.push_back(std::move(r));
    }
    run.files.push_back(std::move(f));
  }
  run.labels = session_labels(config, session);
  clock.mark("load");

  std::vector<std::size_t> all(run.units.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto each = [&](auto&& fn) { parallel_map(all, K, [&](std::size_t i) { fn(run.units[i]); return 0; }); };

  each([&](UnitResult& r) {
    r.summary = planner::summarize(r.unit, backend, retries);
    r.degraded += r.summary.degraded ? 1 : 0;
    r.graph = cfg::build_cfg(r.unit);
  });
  clock.mark("plan");

  each([&](UnitResult& r) {
    const std::vector<detector::SensitiveSegment> stat = detector::detect_static(r.unit, r.graph, tree);
    const detector::MatchResult match = detector::detect_match(r.unit, tree, backend, retries);
    r.static_segments = stat.size();
    r.match_segments = match.segments.size();
    r.degraded += match.degraded_calls;
    for (const detector::SensitiveSegment& s :
         detector::drop_guarded(detector::merge(stat, match.segments), r.graph, tree)) {
      SegmentTrace t;
      t.segment = s;
      r.segments.push_back(std::move(t));
    }
  });
  clock.mark("detect");

  each([&](UnitResult& r) {
    if (r.segments.empty()) return;
    for (const SegmentTrace& t : r.segments) {
      r.queries.push_back({r.unit.id, detail::segment_text(r.unit, t.segment), t.segment.hints});
    }
    r.branches = rag::activate_all(r.queries, run.labels);
    r.retrievals = rag::retrieve(r.summary, r.queries, r.branches, tree, config.rag.delta, config.rag.max_depth);
    const std::vector<std::string> ordered(r.branches.begin(), r.branches.end());
    const std::string code = r.unit.text();
    r.predictions = parallel_map(ordered, K, [&](const std::string& b) {
      return predict_branch(code, r.summary.text, b, tree, backend, retries);
    });
    for (const BranchPrediction& p : r.predictions) r.degraded += p.degraded ? 1 : 0;
  });
  clock.mark("retrieve");

  each([&](UnitResult& r) {
    std::map<std::string, std::set<std::string>> by_branch;
    for (const rag::Retrieval& x : r.retrievals) by_branch[x.branch].insert(x.node);
    for (const BranchPrediction& p : r.predictions) by_branch[p.branch].insert(p.types.begin(), p.types.end());
    for (SegmentTrace& t : r.segments) {
      const std::set<std::string>& scope = t.segment.hints.empty() ? r.branches : t.segment.hints;
      std::set<std::string> candidates;
      for (const std::string& b : scope) {
        auto it = by_branch.find(b);
        if (it != by_branch.end()) candidates.insert(it->second.begin(), it->second.end());
      }
      t.candidates.assign(candidates.begin(), candidates.end());
      if (t.candidates.empty()) {
        t.note = "no candidate exception types";
        continue;
      }
      const std::string text = detail::segment_text(r.unit, t.segment);
      const std::vector<ranker::Scores> scores =
          ranker::score_all(t.candidates, text, r.summary, tree, backend, retries);
      std::vector<ranker::RankedException> items;
      for (std::size_t k = 0; k < scores.size(); ++k) {
        ranker::RankedException e;
        e.type = t.candidates[k];
        e.likelihood = scores[k].likelihood;
        e.suitability = scores[k].suitability;
        e.grade = ranker::grade(e.likelihood, e.suitability, config.rank);
        e.segment = t.segment.id();
        e.degraded = scores[k].degraded;
        try {
          e.strategy = tree.strategy_of(e.type);
        } catch (const Error&) {
        }
        items.push_back(std::move(e));
      }
      if (!items.empty() && items.front().degraded) ++r.degraded;
      t.ranked = ranker::rank(std::move(items));
      for (const ranker::RankedException& e : ranker::select(t.ranked, config.rank.gamma)) {
        if (e.strategy.handle_code.empty()) continue;
        t.selected.push_back(e.type);
      }
      if (t.selected.empty()) t.note = "nothing graded above gamma";
    }
  });
  clock.mark("rank");

  each([&](UnitResult& r) {
    std::vector<handler::PatchTarget> targets;
    for (SegmentTrace& t : r.segments) {
      if (t.selected.empty()) continue;
      try {
        t.span = handler::plan_tryspan(t.segment, r.unit, r.graph);
        targets.push_back({*t.span, t.selected, {t.segment.id()}});
      } catch (const Error& e) {
        t.note = e.what();
      }
    }
    if (!targets.empty()) {
      const handler::GenerateResult g =
          handler::generate(r.unit, handler::combine_targets(std::move(targets)), tree, backend, retries);
      r.patches = g.patches;
      r.degraded += g.degraded_calls;
    }
    r.optimized = handler::apply(r.unit, r.patches);
    r.issues = handler::validate(r.optimized, tree);
  });
  clock.mark("handle");

  for (FileResult& f : run.files) {
    f.patched = f.original.lines;
    for (auto it = f.units.rbegin(); it != f.units.rend(); ++it) {
      const UnitResult& r = run.units[*it];
      auto first = f.patched.begin() + (r.unit.start - 1);
      f.patched.erase(first, first + static_cast<std::ptrdiff_t>(r.unit.lines.size()));
      f.patched.insert(f.patched.begin() + (r.unit.start - 1), r.optimized.lines.begin(), r.optimized.lines.end());
    }
  }
  for (const UnitResult& r : run.units) {
    run.degraded += r.degraded;
    run.issue_count += r.issues.size();
  }
  for (const cee::BranchLabel& l : run.labels) run.degraded += l.degraded ? 1 : 0;
  run.backend_calls = session.counter->calls();
  run.backend_failures = session.counter->failures();
  if (config.live && run.backend_calls > 0 && run.backend_failures == run.backend_calls) {
    throw Error(ErrorCode::backend, "every backend call failed; is the endpoint reachable?");
  }
  clock.mark("assemble");
  clock.finish();
  return run;
}

inline std::string patched_text(const FileResult& f) {
  return javasrc::join_lines(f.patched, f.original.trailing_newline);
}

inline std::vector<metrics::Span> try_spans(const RunResult& run, const FileResult& f) {
  std::vector<metrics::Span> out;
  for (std::size_t i : f.units) {
    for (const handler::Patch& p : run.units[i].patches) out.push_back({p.start, p.end});
  }
  return out;
}

inline std::set<std::string> detected_types(const RunResult& run, const FileResult& f) {
  std::set<std::string> out;
  for (std::size_t i : f.units) {
    for (const SegmentTrace& t : run.units[i].segments) out.insert(t.selected.begin(), t.selected.end());
  }
  return out;
}

inline json to_json(const SegmentTrace& t) {
  json ranked = json::array();
  for (const ranker::RankedException& e : t.ranked) ranked.push_back(ranker::to_json(e));
  std::vector<std::string> origins;
  for (detector::Origin o : t.segment.origins) origins.emplace_back(detector::to_string(o));
  json j = {{"id", t.segment.id()},
            {"lines", {t.segment.start, t.segment.end}},
            {"origins", origins},
            {"hints", t.segment.hints},
            {"candidates", t.candidates},
            {"ranked", ranked},
            {"selected", t.selected}};
  j["try_span"] = t.span ? json({t.span->start, t.span->end}) : json(nullptr);
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

inline json to_json(const UnitResult& r) {
  json segments = json::array(), retrievals = json::array(), predictions = json::array(), patches = json::array();
  for (const SegmentTrace& t : r.segments) segments.push_back(to_json(t));
  for (const rag::Retrieval& x : r.retrievals) retrievals.push_back(rag::to_json(x));
  for (const BranchPrediction& p : r.predictions) {
    predictions.push_back({{"branch", p.branch}, {"types", p.types}, {"degraded", p.degraded}});
  }
  for (const handler::Patch& p : r.patches) patches.push_back(handler::to_json(p));
  return {{"unit", r.unit.id},
          {"kind", planner::to_string(r.unit.kind)},
          {"lines", {r.unit.start, r.unit.end}},
          {"summary", r.summary.text},
          {"detected", {{"static", r.static_segments}, {"match", r.match_segments}}},
          {"segments", segments},
          {"branches", r.branches},
          {"retrievals", retrievals},
          {"predictions", predictions},
          {"patches", patches},
          {"validation", r.issues},
          {"degraded_calls", r.degraded}};
}

/// The RunReport. Timings are kept out of it so that repeated runs compare
/// byte for byte; see RunResult::timings.
inline json report_json(const RunResult& run, const PipelineConfig& config) {
  json files = json::array();
  std::size_t segments = 0, patches = 0;
  for (const FileResult& f : run.files) {
    json units = json::array();
    std::vector<std::string> issues;
    for (std::size_t i : f.units) {
      const UnitResult& r = run.units[i];
      units.push_back(to_json(r));
      segments += r.segments.size();
      patches += r.patches.size();
      issues.insert(issues.end(), r.issues.begin(), r.issues.end());
    }
    json spans = json::array();
    for (const metrics::Span& s : try_spans(run, f)) spans.push_back({s.start, s.end});
    files.push_back({{"file", f.source.name},
                     {"patched", "patched/" + f.source.name},
                     {"try_spans", spans},
                     {"exception_types", detected_types(run, f)},
                     {"validation", issues},
                     {"units", units}});
  }
  json labels = json::array();
  for (const cee::BranchLabel& l : run.labels) {
    labels.push_back({{"branch", l.branch}, {"revision", l.revision}, {"degraded", l.degraded}});
  }
  return {{"config", to_json(config)},
          {"labels", labels},
          {"files", files},
          {"totals",
           {{"files", run.files.size()},
            {"units", run.units.size()},
            {"segments", segments},
            {"patches", patches},
            {"validation_issues", run.issue_count},
            {"degraded_calls", run.degraded},
            {"backend_calls", run.backend_calls}}}};
}

inline void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

/// Writes report.json, timings.json and patched/<name> for every input.
/// Refuses to overwrite an input file.
inline void write_outputs(const RunResult& run, const json& report, const std::string& output_dir) {
  const fs::path out(output_dir);
  for (const FileResult& f : run.files) {
    const fs::path target = out / "patched" / f.source.name;
    if (fs::exists(target) && fs::equivalent(target, f.source.path)) {
      throw Error(ErrorCode::io, "output would overwrite input " + f.source.path);
    }
  }
  for (const FileResult& f : run.files) write_file(out / "patched" / f.source.name, patched_text(f));
  write_file(out / "report.json", report.dump(2) + "\n");
  write_file(out / "timings.json", run.timings.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Evaluate.

inline std::vector<metrics::Detections> detections(const RunResult& run) {
  std::vector<metrics::Detections> out;
  for (const FileResult& f : run.files) {
    metrics::Detections d;
    d.name = f.source.name;
    for (std::size_t i : f.units) {
      const UnitResult& r = run.units[i];
      for (const SegmentTrace& t : r.segments) d.segments.push_back({t.segment.start, t.segment.end});
      for (const handler::Patch& p : r.patches) d.blocks.push_back(handler::patch_block(r.optimized, p));
    }
    d.try_spans = try_spans(run, f);
    d.types = detected_types(run, f);
    d.generated = patched_text(f);
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<metrics::GroundTruth> load_truth(const std::vector<SourceInput>& sources, const cee::CeeTree& tree) {
  std::vector<std::string> missing;
  for (const SourceInput& s : sources) {
    if (!fs::exists(metrics::sidecar_path(s.path))) missing.push_back(s.name);
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::io, "missing .expect.json sidecar for: " + llm::mock::join(missing, ", "));
  }
  std::vector<metrics::GroundTruth> out;
  for (const SourceInput& s : sources) out.push_back(metrics::load_ground_truth(s.path, s.name, tree));
  return out;
}

// ---------------------------------------------------------------------------
// Bench.

struct BenchReport {
  int branches = 0;
  int latency_ms = 0;
  int workers = 1;
  long calls = 0;
  double sequential_ms = 0.0;
  double parallel_ms = 0.0;

  double bound_ms() const {
    if (branches == 0) return 0.0;
    return std::ceil(static_cast<double>(branches) / workers) * latency_ms;
  }
  std::optional<double> speedup() const {
    if (branches == 0 || parallel_ms <= 0.0) return std::nullopt;
    return sequential_ms / parallel_ms;
  }
};

inline const char* kBenchUnit =
    "void load(String name) throws Exception {\n"
    "    Reader r = new FileReader(name);\n"
    "    int n = Integer.parseInt(name);\n"
    "    Class<?> c = Class.forName(name);\n"
    "    Thread.sleep(n);\n"
    "}\n";

/// Retrieval plus one predator call for each of `branches` synthetic
/// branches (bundled branch roots, cycled), once on one thread and once
/// with `workers` threads and in-flight slots.
inline BenchReport bench(const std::shared_ptr<const cee::CeeTree>& tree, int branches, int latency_ms, int workers) {
  if (branches < 0 || latency_ms < 0 || workers < 1) {
    throw Error(ErrorCode::config, "bench needs branches >= 0, latency >= 0 and workers >= 1");
  }
  BenchReport report;
  report.branches = branches;
  report.latency_ms = latency_ms;
  report.workers = workers;
  const std::vector<std::string> roots = tree->branch_roots();
  std::vector<std::string> synthetic;
  for (int i = 0; i < branches; ++i) synthetic.push_back(roots[static_cast<std::size_t>(i) % roots.size()]);
  const std::set<std::string> context = javasrc::content_terms(kBenchUnit);

  auto run = [&](int k, double& elapsed) {
    auto mock = std::make_shared<llm::MockBackend>(tree, std::chrono::milliseconds(latency_ms));
    llm::BoundedBackend bounded(mock, k);
    const auto t0 = std::chrono::steady_clock::now();
    parallel_map(synthetic, k, [&](const std::string& b) {
      rag::retrieve_branch(context, b, *tree, 0.25, cee::kMaxDepth);
      return predict_branch(kBenchUnit, "Loads a resource by name.", b, *tree, bounded, 0).types.size();
    });
    elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report.calls += mock->calls();
  };
  run(1, report.sequential_ms);
  run(workers, report.parallel_ms);
  return report;
}

inline json to_json(const BenchReport& r) {
  const std::optional<double> s = r.speedup();
  return {{"branches", r.branches},
          {"latency_ms", r.latency_ms},
          {"workers", r.workers},
          {"calls", r.calls},
          {"sequential_ms", r.sequential_ms},
          {"parallel_ms", r.parallel_ms},
          {"bound_ms", r.bound_ms()},
          {"speedup", s ? json(*s) : json(nullptr)},
          {"parallel_over_sequential", r.sequential_ms > 0 ? json(r.parallel_ms / r.sequential_ms) : json(nullptr)}};
}

}  // namespace exguard::pipeline
