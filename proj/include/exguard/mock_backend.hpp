// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Offline completion backend. Every template is answered by a fixed rule
// over the CEE keyword table, so identical prompts give identical bytes.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "exguard/cee.hpp"
#include "exguard/gateway.hpp"
#include "exguard/javasrc.hpp"

namespace exguard::llm {

namespace mock {

/// "N: text" lines as produced for the detector prompts.
struct NumberedLine {
  int line = 0;
  std::string text;
};

inline std::vector<NumberedLine> parse_numbered(const std::string& block) {
  std::vector<NumberedLine> out;
  for (const std::string& raw : javasrc::split_lines(block)) {
    const std::size_t colon = raw.find(": ");
    NumberedLine l;
    try {
      l.line = std::stoi(raw.substr(0, colon));
    } catch (const std::exception&) {
      continue;
    }
    l.text = colon == std::string::npos ? std::string() : raw.substr(colon + 2);
    out.push_back(std::move(l));
  }
  return out;
}

/// Names before the colon of "Name: description" lines.
inline std::set<std::string> listed_names(const std::string& block) {
  std::set<std::string> out;
  for (const std::string& raw : javasrc::split_lines(block)) {
    const std::size_t colon = raw.find(':');
    if (colon == std::string::npos) continue;
    std::string name = javasrc::trim(raw.substr(0, colon));
    if (name.rfind("- ", 0) == 0) name = name.substr(2);
    if (!name.empty()) out.insert(name);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::vector<std::string> first_n(std::vector<std::string> v, std::size_t n) {
  if (v.size() > n) v.resize(n);
  return v;
}

/// Rule-based code review used by the judge template; shared with the
/// degraded judge path.
inline std::pair<bool, std::string> review(const cee::CeeTree& tree, const std::string& block) {
  const std::vector<javasrc::TryRegion> regions = javasrc::scan_try_blocks(block);
  if (regions.empty()) return {false, "no try statement"};
  const std::vector<std::string> lines = javasrc::split_lines(block);
  for (const javasrc::TryRegion& r : regions) {
    if (r.catches.empty() && !r.has_finally) return {false, "try without handlers"};
    std::string body;
    for (int l = r.body_open_line; l <= r.body_close_line && l <= static_cast<int>(lines.size()); ++l) {
      body += lines[l - 1] + "\n";
    }
    const bool specific_available = !cee::api_hits(tree, body).empty();
    std::vector<std::string> earlier;
    for (const javasrc::CatchClause& c : r.catches) {
      if (c.body_empty) return {false, "empty catch body"};
      for (const std::string& t : c.types) {
        if ((t == "Exception" || t == "Throwable") && specific_available) {
          return {false, "catches " + t + " where a specific type applies"};
        }
        for (const std::string& e : earlier) {
          if (cee::is_same_or_subtype(tree, t, e) && t != e) return {false, "unreachable catch of " + t};
        }
      }
      earlier.insert(earlier.end(), c.types.begin(), c.types.end());
    }
  }
  return {true, "handlers are specific, non-empty and ordered"};
}

/// Likelihood rule used by the ranker template and its fallback: share of
/// the code's fragile-API lines whose calls name the type. Code without
/// API hits scores the share of the node's property terms it contains.
inline double likelihood(const cee::CeeTree& tree, const std::string& type, const std::string& code) {
  const std::map<int, std::set<std::string>> hits = cee::api_hits(tree, code);
  if (!hits.empty()) {
    std::size_t named = 0;
    for (const auto& [line, owners] : hits) named += owners.count(type);
    return static_cast<double>(named) / static_cast<double>(hits.size());
  }
  const std::set<std::string> prop = javasrc::content_terms(tree.node(type).property);
  if (prop.empty()) return 0.0;
  const std::set<std::string> code_terms = javasrc::content_terms(code);
  std::size_t hit = 0;
  for (const std::string& t : prop) hit += code_terms.count(t);
  return static_cast<double>(hit) / static_cast<double>(prop.size());
}

inline double suitability(const cee::CeeTree& tree, const std::string& type) {
  try {
    return tree.strategy_of(type).handle_code.empty() ? 0.5 : 1.0;
  } catch (const Error&) {
    return 0.5;
  }
}

/// Catch clauses of a `try {PLACEHOLDER} catch ...` template, i.e. the text
/// after the closing brace of the try body.
inline std::string catch_tail(const std::string& tmpl) {
  const std::size_t at = tmpl.find(cee::kFragilePlaceholder);
  if (at == std::string::npos) return {};
  const std::size_t close = tmpl.find('}', at + cee::kFragilePlaceholder.size());
  if (close == std::string::npos) return {};
  return tmpl.substr(close + 1);
}

}  // namespace mock

class MockBackend final : public CompletionBackend {
 public:
  explicit MockBackend(std::shared_ptr<const cee::CeeTree> tree,
                       std::chrono::milliseconds latency = std::chrono::milliseconds(0))
      : tree_(std::move(tree)), latency_(latency) {}

  bool is_mock() const override { return true; }
  long calls() const { return calls_.load(); }

  Completion complete(const std::string& prompt) override {
    ++calls_;
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    Completion c;
    c.raw = respond(prompt);
    c.attempts = 1;
    return c;
  }

  std::string respond(const std::string& prompt) const {
    const std::optional<std::string> name = template_of(prompt);
    if (!name) throw Error(ErrorCode::unknown_template, "prompt carries no template marker");
    json out;
    if (*name == "cee-genscenario") {
      out = gen_scenario(prompt);
    } else if (*name == "cee-genproperty") {
      out = gen_property(prompt);
    } else if (*name == "planner") {
      out = summarize(prompt);
    } else if (*name == "detector-scenario") {
      out = label_lines(need(prompt, "Scenario description"), need(prompt, "Java code"));
    } else if (*name == "detector-property") {
      out = label_lines(need(prompt, "property description"), need(prompt, "Java code"));
    } else if (*name == "predator") {
      out = predict(prompt);
    } else if (*name == "ranker") {
      out = rank(prompt);
    } else if (*name == "handler") {
      out = handle(prompt);
    } else if (*name == "judge") {
      const auto [good, reason] = mock::review(*tree_, need(prompt, "Try-Catch Block"));
      out = {{"verdict", good ? "good" : "bad"}, {"reason", reason}};
    } else {
      throw Error(ErrorCode::unknown_template, "no mock rule for template '" + *name + "'");
    }
    return out.dump();
  }

 private:
  static std::string need(const std::string& prompt, const std::string& header) {
    std::optional<std::string> s = section(prompt, header);
    if (!s) throw Error(ErrorCode::precondition, "prompt lacks section [" + header + "]");
    return *s;
  }

  const cee::CeeNode* find(const std::string& name) const {
    const std::string n = javasrc::trim(name);
    return tree_->contains(n) ? &tree_->node(n) : nullptr;
  }

  // Dangerous-operation terms first, then the sample description verbatim.
  json gen_scenario(const std::string& prompt) const {
    const std::string sample = javasrc::trim(need(prompt, "Sample Description"));
    const std::string ename = javasrc::trim(need(prompt, "Exception"));
    std::string text;
    if (const cee::CeeNode* n = find(ename)) {
      const auto terms = mock::first_n(javasrc::ordered_terms(n->info.dangerous_operations), 12);
      if (!terms.empty()) text = "Code that performs " + mock::join(terms, ", ") + " operations.";
    }
    if (!text.empty() && sample.rfind(text, 0) == 0) text.clear();  // refinement input already carries it
    if (!sample.empty()) text += (text.empty() ? "" : " ") + sample;
    return {{"scenario", text}};
  }

  json gen_property(const std::string& prompt) const {
    const std::string ename = javasrc::trim(need(prompt, "Exception"));
    const std::string scenario = javasrc::trim(need(prompt, "Scenario Description"));
    std::string property;
    if (const cee::CeeNode* n = find(ename)) {
      const auto terms = mock::first_n(javasrc::ordered_terms(n->info.reasons), 12);
      property = ename + " signals failure caused by " + mock::join(terms, ", ") + ".";
    } else {
      property = ename + " signals failure of: " + scenario;
    }
    return {{"scenario", scenario}, {"property", property}};
  }

  json summarize(const std::string& prompt) const {
    const std::string code = need(prompt, "Codebase");
    const std::string masked = javasrc::mask(code);
    std::vector<std::string> calls;
    for (const javasrc::CallToken& c : javasrc::call_tokens(masked)) {
      const std::string shown = c.qualifier.empty() ? c.name : c.qualifier + "." + c.name;
      if (std::find(calls.begin(), calls.end(), shown) == calls.end()) calls.push_back(shown);
    }
    std::set<std::string> hit;
    for (const auto& [line, owners] : cee::api_hits(*tree_, code)) hit.insert(owners.begin(), owners.end());
    std::string text = "Code unit of " + std::to_string(javasrc::split_lines(code).size()) + " lines";
    text += calls.empty() ? " without calls." : " calling " + mock::join(mock::first_n(calls, 20), ", ") + ".";
    for (const std::string& n : hit) text += " It may " + tree_->node(n).scenario + ".";
    return {{"summary", javasrc::cap_words(text, 120)}};
  }

  json label_lines(const std::string& descriptions, const std::string& numbered) const {
    const std::set<std::string> listed = mock::listed_names(descriptions);
    const std::vector<mock::NumberedLine> lines = mock::parse_numbered(numbered);
    std::string code;
    for (const auto& l : lines) code += l.text + "\n";
    const auto hits = cee::api_hits(*tree_, code);
    json labels = json::array();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      json names = json::array();
      auto it = hits.find(static_cast<int>(i) + 1);
      if (it != hits.end()) {
        for (const std::string& n : it->second) {
          if (listed.count(n)) names.push_back(n);
        }
      }
      if (names.empty()) names.push_back("None");
      labels.push_back({{"line", lines[i].line}, {"labels", names}});
    }
    return {{"code_with_label", labels}};
  }

  json predict(const std::string& prompt) const {
    const std::string code = need(prompt, "Code Unit");
    const std::string branches = need(prompt, "Potential Exception Branches");
    std::set<std::string> hit;
    for (const auto& [line, owners] : cee::api_hits(*tree_, code)) hit.insert(owners.begin(), owners.end());
    json nodes = json::array();
    std::set<std::string> emitted;
    for (const std::string& raw : javasrc::split_lines(branches)) {
      const std::size_t colon = raw.find(':');
      if (colon == std::string::npos) continue;
      std::stringstream list(raw.substr(colon + 1));
      std::string item;
      while (std::getline(list, item, ',')) {
        item = javasrc::trim(item);
        if (hit.count(item) && emitted.insert(item).second) nodes.push_back({{"ExceptionType", item}});
      }
    }
    return {{"ExceptionNodes", nodes}};
  }

  json rank(const std::string& prompt) const {
    const json items = json::parse(need(prompt, "Identified Exceptions and Handling Strategies"));
    json out = json::array();
    for (const json& item : items) {
      const std::string type = item.value("ExceptionType", std::string());
      const std::string code = item.value("Code", std::string());
      const bool known = tree_->contains(type);
      out.push_back({{"ExceptionType", type},
                     {"LikelihoodScore", known ? mock::likelihood(*tree_, type, code) : 0.0},
                     {"SuitabilityScore", known ? mock::suitability(*tree_, type) : 0.5}});
    }
    return {{"Exceptions", out}};
  }

  json handle(const std::string& prompt) const {
    const std::string code = need(prompt, "Code Unit");
    const json strategies = json::parse(need(prompt, "Handling Strategy"));
    std::string out = "try {\n" + code + "\n}";
    for (const json& s : strategies) out += mock::catch_tail(s.value("Template", std::string()));
    return {{"optimized_code", out}};
  }

  std::shared_ptr<const cee::CeeTree> tree_;
  std::chrono::milliseconds latency_;
  mutable std::atomic<long> calls_{0};
};

}  // namespace exguard::llm
