// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Likelihood/suitability scoring, weighted grades, ranking and selection.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/gateway.hpp"
#include "exguard/mock_backend.hpp"
#include "exguard/planner.hpp"

namespace exguard::ranker {

using json = nlohmann::json;

struct RankConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.6;

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0)) {
      throw Error(ErrorCode::config, "rank weights need alpha >= 0, beta >= 0 and alpha + beta > 0");
    }
  }
};

struct Scores {
  double likelihood = 0.0;
  double suitability = 0.0;
  bool degraded = false;
};

struct RankedException {
  std::string type;
  double likelihood = 0.0;
  double suitability = 0.0;
  double grade = 0.0;
  cee::HandlingStrategy strategy;
  std::string segment;  // SensitiveSegment id
  bool degraded = false;
};

inline double clamp01(double v) {
  if (!(v >= 0.0)) return 0.0;  // also NaN
  return std::min(v, 1.0);
}

inline double grade(double l, double u, const RankConfig& c) { return c.alpha * l + c.beta * u; }

inline Scores fallback_scores(const cee::CeeTree& tree, const std::string& type, const std::string& code) {
  return {llm::mock::likelihood(tree, type, code), llm::mock::suitability(tree, type), true};
}

/// Scores several candidate types against one code segment with a single
/// ranker prompt. Types the reply omits fall back to the offline formula.
inline std::vector<Scores> score_all(const std::vector<std::string>& types, const std::string& segment_text,
                                     const planner::FunctionSummary& summary, const cee::CeeTree& tree,
                                     llm::CompletionBackend& backend, int retries = 2) {
  if (types.empty()) return {};
  json items = json::array();
  for (const std::string& t : types) {
    if (!tree.contains(t)) throw Error(ErrorCode::precondition, "cannot score unknown type '" + t + "'");
    std::string logic;
    try {
      logic = tree.strategy_of(t).handle_logic;
    } catch (const Error&) {
    }
    items.push_back({{"ExceptionType", t}, {"HandlingStrategy", logic}, {"Code", segment_text},
                     {"Summary", summary.text}});
  }
  std::vector<Scores> out;
  try {
    const llm::Completion c = llm::complete_structured(
        backend, "ranker", llm::render("ranker", {{"exception_nodes", items.dump(2)}}), retries);
    const json& rows = c.payload->at("Exceptions");
    for (const std::string& t : types) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const json& r) { return r.value("ExceptionType", std::string()) == t; });
      if (it == rows.end()) {
        out.push_back(fallback_scores(tree, t, segment_text));
      } else {
        out.push_back({clamp01(it->at("LikelihoodScore").get<double>()),
                       clamp01(it->at("SuitabilityScore").get<double>()), false});
      }
    }
  } catch (const Error&) {
    out.clear();
    for (const std::string& t : types) out.push_back(fallback_scores(tree, t, segment_text));
  }
  return out;
}

inline Scores score(const std::string& type, const std::string& segment_text, const planner::FunctionSummary& summary,
                    const cee::CeeTree& tree, llm::CompletionBackend& backend, int retries = 2) {
  return score_all({type}, segment_text, summary, tree, backend, retries).front();
}

inline bool ranks_before(const RankedException& a, const RankedException& b) {
  if (a.grade != b.grade) return a.grade > b.grade;
  if (a.type != b.type) return a.type < b.type;
  return a.segment < b.segment;
}

inline std::vector<RankedException> rank(std::vector<RankedException> items) {
  std::stable_sort(items.begin(), items.end(), ranks_before);
  return items;
}

/// Items graded strictly above gamma, in ranked order.
inline std::vector<RankedException> select(const std::vector<RankedException>& ranked, double gamma) {
  std::vector<RankedException> out;
  for (const RankedException& r : ranked) {
    if (r.grade > gamma) out.push_back(r);
  }
  return out;
}

inline json to_json(const RankedException& r) {
  return {{"type", r.type},         {"likelihood", r.likelihood}, {"suitability", r.suitability},
          {"grade", r.grade},       {"segment", r.segment},       {"strategy_source", r.strategy.source_node},
          {"degraded", r.degraded}};
}

}  // namespace exguard::ranker
