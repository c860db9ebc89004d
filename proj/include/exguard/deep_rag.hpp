// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Branch-labeled retrieval over the exception tree: scenario labels per
// branch, query activation, few-sample verification with label refinement,
// and depth-bounded node retrieval by term overlap.

#pragma once

#include <algorithm>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/gateway.hpp"
#include "exguard/javasrc.hpp"
#include "exguard/planner.hpp"
#include "exguard/work_pool.hpp"

namespace exguard::rag {

using json = nlohmann::json;

struct RagConfig {
  double theta = 0.7;
  double delta = 0.25;
  int max_depth = 5;
  int workers = 8;

  void validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorCode::config, "theta must lie in [0,1]");
    if (!(delta >= 0.0 && delta <= 1.0)) throw Error(ErrorCode::config, "delta must lie in [0,1]");
    if (max_depth < 1 || max_depth > cee::kMaxDepth) throw Error(ErrorCode::config, "max depth must lie in [1,5]");
    if (workers < 1) throw Error(ErrorCode::config, "workers must be >= 1");
  }
};

struct Query {
  std::string unit_id;
  std::string text;
  std::set<std::string> hints;
};

using Labels = std::vector<cee::BranchLabel>;

inline const cee::BranchLabel* find_label(const Labels& labels, const std::string& branch) {
  for (const cee::BranchLabel& l : labels) {
    if (l.branch == branch) return &l;
  }
  return nullptr;
}

/// Scenario texts of every node in the branch, preorder, one sentence each.
inline std::string branch_sample(const cee::CeeTree& tree, const std::string& branch) {
  std::string out;
  for (const std::string& m : tree.branch_members(branch)) {
    const std::string& s = tree.node(m).scenario;
    if (s.empty()) continue;
    if (!out.empty()) out += " ";
    out += s;
    if (out.back() != '.') out += ".";
  }
  return out;
}

inline std::set<std::string> scenario_terms(const cee::CeeTree& tree, const std::string& branch) {
  return javasrc::content_terms(branch_sample(tree, branch));
}

inline std::string ask_label_text(const std::string& branch, const std::string& sample, llm::CompletionBackend& backend,
                                  int retries) {
  const std::string prompt = llm::render("cee-genscenario", {{"sample_desc", sample}, {"ename", branch}});
  return llm::complete_structured(backend, "cee-genscenario", prompt, retries).payload->at("scenario").get<std::string>();
}

inline cee::BranchLabel fallback_label(const cee::CeeTree& tree, const std::string& branch) {
  cee::BranchLabel l;
  l.branch = branch;
  l.text = branch_sample(tree, branch);
  l.keywords = javasrc::content_terms(l.text);
  l.degraded = true;
  return l;
}

inline Labels assign_labels(const cee::CeeTree& tree, llm::CompletionBackend& backend, int workers = 8,
                            int retries = 2) {
  return parallel_map(tree.branch_roots(), workers, [&](const std::string& branch) {
    const std::string sample = branch_sample(tree, branch);
    try {
      cee::BranchLabel l;
      l.branch = branch;
      l.text = ask_label_text(branch, sample, backend, retries);
      l.keywords = javasrc::content_terms(l.text);
      for (const std::string& t : javasrc::content_terms(sample)) l.keywords.insert(t);
      return l;
    } catch (const Error&) {
      return fallback_label(tree, branch);
    }
  });
}

/// Hinted branches plus every branch sharing at least one keyword with the
/// query text.
inline std::set<std::string> activate(const Query& query, const Labels& labels) {
  std::set<std::string> out = query.hints;
  const std::set<std::string> terms = javasrc::content_terms(query.text);
  for (const cee::BranchLabel& l : labels) {
    for (const std::string& t : terms) {
      if (l.keywords.count(t)) {
        out.insert(l.branch);
        break;
      }
    }
  }
  return out;
}

inline std::set<std::string> activate_all(const std::vector<Query>& queries, const Labels& labels) {
  std::set<std::string> out;
  for (const Query& q : queries) {
    const std::set<std::string> b = activate(q, labels);
    out.insert(b.begin(), b.end());
  }
  return out;
}

struct Retrieval {
  std::string node;
  std::string branch;
  int depth = 0;
  double relevance = 0.0;

  bool operator==(const Retrieval&) const = default;
};

inline std::set<std::string> node_terms(const cee::CeeNode& n) {
  std::set<std::string> out = javasrc::content_terms(n.scenario);
  for (const std::string& t : javasrc::content_terms(n.property)) out.insert(t);
  for (const std::string& t : javasrc::content_terms(n.info.dangerous_operations)) out.insert(t);
  return out;
}

inline double relevance(const cee::CeeNode& n, const std::set<std::string>& context) {
  const std::set<std::string> terms = node_terms(n);
  if (terms.empty()) return 0.0;
  std::size_t hit = 0;
  for (const std::string& t : terms) hit += context.count(t);
  return static_cast<double>(hit) / static_cast<double>(terms.size());
}

inline std::vector<Retrieval> retrieve_branch(const std::set<std::string>& context, const std::string& branch,
                                              const cee::CeeTree& tree, double delta, int max_depth) {
  std::vector<Retrieval> out;
  for (const std::string& m : tree.branch_members(branch)) {
    const cee::CeeNode& n = tree.node(m);
    if (n.depth > max_depth) continue;
    const double r = relevance(n, context);
    if (r > delta) out.push_back({n.name, branch, n.depth, r});
  }
  return out;
}

inline void sort_retrievals(std::vector<Retrieval>& v) {
  std::sort(v.begin(), v.end(), [](const Retrieval& a, const Retrieval& b) {
    if (a.relevance != b.relevance) return a.relevance > b.relevance;
    return a.node < b.node;
  });
}

/// Depth-wise retrieval over the activated branches. Nodes are scored by
/// the share of their scenario, property and dangerous-operation terms that
/// occur in the summary or the queries.
inline std::vector<Retrieval> retrieve(const planner::FunctionSummary& summary, const std::vector<Query>& queries,
                                       const std::set<std::string>& branches, const cee::CeeTree& tree,
                                       double delta, int max_depth, int workers = 1) {
  std::set<std::string> context = javasrc::content_terms(summary.text);
  for (const std::string& id : summary.identifiers) {
    for (const std::string& t : javasrc::content_terms(id)) context.insert(t);
  }
  for (const Query& q : queries) {
    for (const std::string& t : javasrc::content_terms(q.text)) context.insert(t);
  }
  const std::vector<std::string> ordered(branches.begin(), branches.end());
  std::vector<Retrieval> out;
  for (auto& part : parallel_map(ordered, workers, [&](const std::string& b) {
         return retrieve_branch(context, b, tree, delta, max_depth);
       })) {
    out.insert(out.end(), part.begin(), part.end());
  }
  sort_retrievals(out);
  return out;
}

struct VerificationSample {
  std::string id;
  std::string text;
  std::string expected_branch;
  std::set<std::string> expected_types;
};

struct FailurePattern {
  std::string sample_id;
  std::string branch;
  std::set<std::string> missing_keywords;
  std::string note;

  bool operator==(const FailurePattern&) const = default;
  auto operator<=>(const FailurePattern& o) const {
    return std::tie(branch, sample_id, note, missing_keywords) <=>
           std::tie(o.branch, o.sample_id, o.note, o.missing_keywords);
  }
};

/// Append-only failure log shared by concurrent verifications.
class EnvContext {
 public:
  void append(FailurePattern p) {
    std::lock_guard lock(mu_);
    records_.push_back(std::move(p));
  }
  std::vector<FailurePattern> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }
  std::vector<FailurePattern> for_branch(const std::string& branch) const {
    std::vector<FailurePattern> out;
    for (const FailurePattern& p : records()) {
      if (p.branch == branch) out.push_back(p);
    }
    return out;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<FailurePattern> records_;
};

struct BranchReport {
  std::string branch;
  std::vector<std::string> sample_ids;
  std::vector<double> pass;
  std::vector<double> accuracy;
  std::optional<double> mean_pass;
  std::optional<double> mean_accuracy;
  bool refined = false;

  bool insufficient_data() const { return !mean_pass.has_value(); }
  bool below(double theta) const {
    return mean_pass && (*mean_pass < theta || *mean_accuracy < theta);
  }
  bool operator==(const BranchReport&) const = default;
};

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline BranchReport verify(const std::string& branch, const std::vector<VerificationSample>& samples,
                           const cee::CeeTree& tree, const Labels& labels, const RagConfig& config,
                           EnvContext& env) {
  BranchReport report;
  report.branch = branch;
  const cee::BranchLabel* label = find_label(labels, branch);
  for (const VerificationSample& s : samples) {
    if (s.expected_branch != branch) {
      throw Error(ErrorCode::precondition, "sample '" + s.id + "' belongs to branch " + s.expected_branch);
    }
    const Query q{s.id, s.text, {}};
    const std::set<std::string> active = activate(q, labels);
    const double p = active.count(branch) ? 1.0 : 0.0;
    std::set<std::string> got;
    for (const Retrieval& r : retrieve({}, {q}, active, tree, config.delta, config.max_depth)) got.insert(r.node);
    std::size_t hit = 0;
    for (const std::string& t : s.expected_types) hit += got.count(t);
    const double a = s.expected_types.empty() ? 1.0
                                              : static_cast<double>(hit) / static_cast<double>(s.expected_types.size());
    report.sample_ids.push_back(s.id);
    report.pass.push_back(p);
    report.accuracy.push_back(a);
    if (p < config.theta || a < config.theta) {
      FailurePattern fp{s.id, branch, {}, {}};
      for (const std::string& t : javasrc::content_terms(s.text)) {
        if (!label || !label->keywords.count(t)) fp.missing_keywords.insert(t);
      }
      std::ostringstream note;
      note << "pass " << p << ", accuracy " << a;
      fp.note = note.str();
      env.append(std::move(fp));
    }
  }
  if (!report.pass.empty()) {
    report.mean_pass = mean(report.pass);
    report.mean_accuracy = mean(report.accuracy);
  }
  return report;
}

struct Refinement {
  cee::BranchLabel label;
  bool degraded = false;
  bool noop = false;  // no failure records for the branch
};

/// New label: keywords grow by the missing keywords recorded for the branch,
/// the revision increments and the text is regenerated.
inline Refinement refine_labels(const std::string& branch, const EnvContext& env, const Labels& labels,
                                const cee::CeeTree& tree, llm::CompletionBackend& backend, int retries = 2) {
  const cee::BranchLabel* old = find_label(labels, branch);
  Refinement r;
  r.label = old ? *old : fallback_label(tree, branch);
  r.label.revision = old ? old->revision + 1 : 1;
  std::set<std::string> missing;
  for (const FailurePattern& p : env.for_branch(branch)) missing.insert(p.missing_keywords.begin(), p.missing_keywords.end());
  r.noop = missing.empty();
  if (r.noop) return r;
  r.label.keywords.insert(missing.begin(), missing.end());
  std::vector<std::string> fresh;
  const std::set<std::string> in_text = javasrc::content_terms(r.label.text);
  for (const std::string& k : missing) {
    if (!in_text.count(k)) fresh.push_back(k);
  }
  if (fresh.empty()) return r;
  std::string sample = r.label.text;
  sample += " Further cues:";
  for (const std::string& k : fresh) sample += " " + k;
  sample += ".";
  try {
    r.label.text = ask_label_text(branch, sample, backend, retries);
    r.label.degraded = false;
  } catch (const Error&) {
    r.label.text = sample;
    r.degraded = true;
    r.label.degraded = true;
  }
  return r;
}

struct VerificationRun {
  std::vector<BranchReport> reports;  // sorted by branch
  Labels labels;
  std::vector<FailurePattern> env;    // sorted
  int refinements = 0;
  int degraded = 0;
};

/// Verifies every branch that has samples (concurrently when workers > 1)
/// and refines the labels of branches whose mean pass rate or accuracy
/// falls below theta.
inline VerificationRun run_verification(const std::vector<VerificationSample>& samples, const cee::CeeTree& tree,
                                        Labels labels, const RagConfig& config, llm::CompletionBackend& backend,
                                        int workers) {
  std::map<std::string, std::vector<VerificationSample>> by_branch;
  for (const VerificationSample& s : samples) by_branch[s.expected_branch].push_back(s);
  std::vector<std::string> branches;
  for (const auto& [b, _] : by_branch) branches.push_back(b);

  EnvContext env;
  VerificationRun run;
  run.reports = parallel_map(branches, workers, [&](const std::string& b) {
    return verify(b, by_branch.at(b), tree, labels, config, env);
  });
  for (BranchReport& report : run.reports) {
    if (!report.below(config.theta)) continue;
    Refinement r = refine_labels(report.branch, env, labels, tree, backend);
    report.refined = true;
    ++run.refinements;
    run.degraded += r.degraded ? 1 : 0;
    bool replaced = false;
    for (cee::BranchLabel& l : labels) {
      if (l.branch == report.branch) {
        l = r.label;
        replaced = true;
      }
    }
    if (!replaced) labels.push_back(r.label);
  }
  run.labels = std::move(labels);
  run.env = env.records();
  std::sort(run.env.begin(), run.env.end());
  return run;
}

inline std::vector<VerificationSample> parse_samples(const json& doc, const cee::CeeTree& tree) {
  if (!doc.is_array()) throw Error(ErrorCode::parse, "samples document must be a JSON array");
  std::vector<VerificationSample> out;
  std::set<std::string> ids;
  for (const json& j : doc) {
    VerificationSample s;
    try {
      s.id = j.at("id").get<std::string>();
      s.text = j.at("text").get<std::string>();
      s.expected_branch = j.at("expected_branch").get<std::string>();
      for (const json& t : j.at("expected_types")) s.expected_types.insert(t.get<std::string>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, std::string("malformed sample: ") + e.what());
    }
    if (!ids.insert(s.id).second) throw Error(ErrorCode::parse, "duplicate sample id '" + s.id + "'");
    if (!tree.contains(s.expected_branch) || tree.node(s.expected_branch).depth != cee::kBranchDepth) {
      throw Error(ErrorCode::parse, "sample '" + s.id + "' names unknown branch '" + s.expected_branch + "'");
    }
    for (const std::string& t : s.expected_types) {
      if (!tree.contains(t)) throw Error(ErrorCode::parse, "sample '" + s.id + "' names unknown type '" + t + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<VerificationSample> load_samples(const std::string& path, const cee::CeeTree& tree) {
  return parse_samples(cee::parse_json_text(cee::read_file(path), path), tree);
}

inline json to_json(const cee::BranchLabel& l) {
  return {{"branch", l.branch},
          {"text", l.text},
          {"keywords", l.keywords},
          {"revision", l.revision},
          {"degraded", l.degraded}};
}

inline json to_json(const Labels& labels) {
  json out = json::array();
  for (const cee::BranchLabel& l : labels) out.push_back(to_json(l));
  return out;
}

inline Labels labels_from_json(const json& doc) {
  Labels out;
  try {
    for (const json& j : doc) {
      cee::BranchLabel l;
      l.branch = j.at("branch").get<std::string>();
      l.text = j.at("text").get<std::string>();
      l.keywords = j.at("keywords").get<std::set<std::string>>();
      l.revision = j.value("revision", 0);
      l.degraded = j.value("degraded", false);
      out.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed labels document: ") + e.what());
  }
  return out;
}

inline json to_json(const BranchReport& r) {
  json j = {{"branch", r.branch}, {"samples", r.sample_ids}, {"pass", r.pass}, {"accuracy", r.accuracy},
            {"refined", r.refined}};
  j["mean_pass"] = r.mean_pass ? json(*r.mean_pass) : json(nullptr);
  j["mean_accuracy"] = r.mean_accuracy ? json(*r.mean_accuracy) : json(nullptr);
  if (r.insufficient_data()) j["insufficient_data"] = true;
  return j;
}

inline json to_json(const FailurePattern& p) {
  return {{"sample", p.sample_id}, {"branch", p.branch}, {"missing_keywords", p.missing_keywords}, {"note", p.note}};
}

inline json to_json(const Retrieval& r) {
  return {{"node", r.node}, {"branch", r.branch}, {"depth", r.depth}, {"relevance", r.relevance}};
}

}  // namespace exguard::rag
