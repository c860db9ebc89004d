// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// The Common Exception Enumeration: a Throwable-rooted tree of exception
// types, each carrying scenario/property/handling-logic knowledge plus the
// dangerous-API keyword table derived from its payload.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "exguard/error.hpp"
#include "exguard/javasrc.hpp"

namespace exguard::cee {

using json = nlohmann::json;

inline constexpr int kMaxDepth = 5;
inline constexpr int kBranchDepth = 2;
inline constexpr std::string_view kRootName = "Throwable";
inline constexpr std::string_view kFragilePlaceholder = "{{fragile_code}}";

struct NodeInfo {
  std::string definition;
  std::string reasons;
  std::string dangerous_operations;
  std::string sample_code;
  std::string handle_code;
  std::string handle_logic;
};

struct CeeNode {
  std::string name;
  std::vector<std::string> children;  // ordered child names
  NodeInfo info;
  std::string scenario;
  std::string property;
  std::optional<std::string> parent;
  int depth = 0;
};

struct HandlingStrategy {
  std::string type_name;
  std::string handle_logic;
  std::string handle_code;  // try/catch template containing kFragilePlaceholder
  std::string source_node;  // node whose handle_code produced the template
};

/// A dangerous API: a call named `name`, optionally only when invoked as
/// `qualifier.name(...)`.
struct ApiKeyword {
  std::string name;
  std::string qualifier;
  auto operator<=>(const ApiKeyword&) const = default;
};

struct TreeStats {
  std::size_t node_count = 0;
  std::size_t branch_count = 0;
  int max_depth = 0;
  bool operator==(const TreeStats&) const = default;
};

struct Violation {
  std::string node;
  std::string message;
};

struct BranchLabel {
  std::string branch;
  std::string text;
  std::set<std::string> keywords;
  int revision = 0;
  bool degraded = false;
};

enum class Strictness { strict, lenient };

namespace detail {

inline const std::set<std::string>& node_fields() {
  static const std::set<std::string> f = {"name", "children", "info", "scenario", "property"};
  return f;
}
inline const std::set<std::string>& info_fields() {
  static const std::set<std::string> f = {"definition", "reasons", "dangerous_operations",
                                          "sample_code", "handle_code", "handle_logic"};
  return f;
}

inline const std::set<std::string>& keyword_noise() {
  static const std::set<std::string> n = {"println", "print", "printf", "printStackTrace",
                                          "getMessage", "toString", "equals", "hashCode",
                                          "getClass", "getCause"};
  return n;
}

inline std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(ErrorCode::parse, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

class CeeTree {
 public:
  CeeTree() = default;

  /// Builds and validates a tree from a parsed CEE document. Throws a
  /// validation error naming the first violated invariant.
  static CeeTree from_json(const json& doc, Strictness strictness = Strictness::lenient,
                           std::vector<std::string>* warnings = nullptr) {
    std::vector<Violation> violations = validate_document(doc, strictness, warnings);
    if (!violations.empty()) {
      throw Error(ErrorCode::validation, violations.front().message + " (node '" +
                                             violations.front().node + "')");
    }
    CeeTree tree;
    tree.add(doc, std::nullopt, 0);
    tree.derive_keywords();
    return tree;
  }

  /// Every invariant violation of a document, in preorder. An empty result
  /// means from_json will succeed.
  static std::vector<Violation> validate_document(const json& doc, Strictness strictness,
                                                  std::vector<std::string>* warnings = nullptr) {
    std::vector<Violation> out;
    if (!doc.is_object()) {
      throw Error(ErrorCode::parse, "CEE document must be a JSON object");
    }
    const std::string root = doc.value("name", std::string());
    if (root != kRootName) out.push_back({root, "root must be Throwable"});
    std::set<std::string> seen;
    std::vector<std::string> ancestors;
    check(doc, 0, ancestors, seen, strictness, warnings, out);
    return out;
  }

  const CeeNode& root() const { return nodes_.at(0); }
  std::size_t size() const { return nodes_.size(); }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  const CeeNode& node(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error(ErrorCode::unknown_name, "unknown exception type '" + std::string(name) + "'");
    return nodes_[it->second];
  }

  /// Nodes in preorder.
  const std::vector<CeeNode>& nodes() const { return nodes_; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(nodes_.size());
    for (const CeeNode& n : nodes_) out.push_back(n.name);
    return out;
  }

  /// Depth-2 nodes in preorder.
  std::vector<std::string> branch_roots() const {
    std::vector<std::string> out;
    for (const CeeNode& n : nodes_) {
      if (n.depth == kBranchDepth) out.push_back(n.name);
    }
    return out;
  }

  /// The branch root itself followed by its descendants, preorder.
  std::vector<std::string> branch_members(std::string_view branch) const {
    std::vector<std::string> out;
    collect(node(branch), out);
    return out;
  }

  /// Strict ancestry: true iff `ancestor` lies on the root path of `child`
  /// and differs from it.
  bool is_subtype(std::string_view child, std::string_view ancestor) const {
    const CeeNode* cur = &node(child);
    node(ancestor);
    while (cur->parent) {
      cur = &node(*cur->parent);
      if (cur->name == ancestor) return true;
    }
    return false;
  }

  std::string branch_of(std::string_view name) const {
    const CeeNode* cur = &node(name);
    if (cur->depth < kBranchDepth) {
      throw Error(ErrorCode::depth_too_shallow, "'" + cur->name + "' lies above branch depth");
    }
    while (cur->depth > kBranchDepth) cur = &node(*cur->parent);
    return cur->name;
  }

  TreeStats stats() const {
    TreeStats s;
    s.node_count = nodes_.size();
    for (const CeeNode& n : nodes_) {
      if (n.depth == kBranchDepth) ++s.branch_count;
      s.max_depth = std::max(s.max_depth, n.depth);
    }
    return s;
  }

  HandlingStrategy strategy_of(std::string_view name) const {
    const CeeNode& target = node(name);
    HandlingStrategy strategy;
    strategy.type_name = target.name;
    const CeeNode* code_source = nullptr;
    for (const CeeNode* cur = &target;; cur = &node(*cur->parent)) {
      if (strategy.handle_logic.empty() && cur->depth >= 1 && !cur->info.handle_logic.empty()) {
        strategy.handle_logic = cur->info.handle_logic;
      }
      if (!code_source && !cur->info.handle_code.empty()) code_source = cur;
      if (!cur->parent) break;
    }
    if (strategy.handle_logic.empty()) {
      throw Error(ErrorCode::no_strategy, "no handling logic on the path of '" + target.name + "'");
    }
    if (code_source) {
      strategy.source_node = code_source->name;
      strategy.handle_code = make_template(*code_source, target.name);
    }
    return strategy;
  }

  const std::map<ApiKeyword, std::set<std::string>>& keywords() const { return keywords_; }

  /// Owners of every keyword matched by a call site.
  std::set<std::string> owners_of(const javasrc::CallToken& call) const {
    std::set<std::string> out;
    auto add = [&](const ApiKeyword& k) {
      auto it = keywords_.find(k);
      if (it != keywords_.end()) out.insert(it->second.begin(), it->second.end());
    };
    add({call.name, {}});
    if (!call.qualifier.empty()) add({call.name, call.qualifier});
    return out;
  }

  /// Keywords owned by one node.
  std::set<ApiKeyword> keywords_of(std::string_view name) const {
    std::set<ApiKeyword> out;
    for (const auto& [kw, owners] : keywords_) {
      if (owners.count(std::string(name))) out.insert(kw);
    }
    return out;
  }

  json to_json() const { return node_json(root()); }

 private:
  static void check(const json& j, int depth, std::vector<std::string>& ancestors,
                    std::set<std::string>& seen, Strictness strictness,
                    std::vector<std::string>* warnings, std::vector<Violation>& out) {
    if (!j.is_object()) throw Error(ErrorCode::parse, "CEE node must be a JSON object");
    const std::string name = detail::string_field(j, "name");
    auto unknown = [&](const std::string& field) {
      const std::string msg = "unknown field '" + field + "'";
      if (strictness == Strictness::strict) {
        out.push_back({name, msg});
      } else if (warnings) {
        warnings->push_back(name + ": " + msg);
      }
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!detail::node_fields().count(it.key())) unknown(it.key());
    }
    if (name.empty()) out.push_back({name, "name must be non-empty"});
    if (!name.empty() && !seen.insert(name).second) out.push_back({name, "duplicate name"});
    if (depth > kMaxDepth) out.push_back({name, "depth exceeds " + std::to_string(kMaxDepth)});

    const json empty_info = json::object();
    const json& info = j.contains("info") ? j.at("info") : empty_info;
    if (!info.is_object()) throw Error(ErrorCode::parse, "info of '" + name + "' must be an object");
    for (auto it = info.begin(); it != info.end(); ++it) {
      if (!detail::info_fields().count(it.key())) unknown("info." + it.key());
    }
    const bool leaf = !j.contains("children") || j.at("children").empty();
    if (leaf) {
      if (detail::string_field(j, "scenario").empty()) out.push_back({name, "leaf missing scenario"});
      if (detail::string_field(j, "property").empty()) out.push_back({name, "leaf missing property"});
      if (detail::string_field(info, "handle_logic").empty()) out.push_back({name, "leaf missing handle_logic"});
    }
    const std::string handle_code = detail::string_field(info, "handle_code");
    if (!handle_code.empty()) {
      bool ok = false;
      for (const javasrc::TryRegion& region : javasrc::scan_try_blocks(handle_code)) {
        for (const javasrc::CatchClause& clause : region.catches) {
          for (const std::string& type : clause.types) {
            if (type == name || std::find(ancestors.begin(), ancestors.end(), type) != ancestors.end()) ok = true;
          }
        }
      }
      if (!ok) out.push_back({name, "handle_code catches no type on its root path"});
    }
    if (j.contains("children")) {
      const json& children = j.at("children");
      if (!children.is_array()) throw Error(ErrorCode::parse, "children of '" + name + "' must be an array");
      ancestors.push_back(name);
      for (const json& child : children) check(child, depth + 1, ancestors, seen, strictness, warnings, out);
      ancestors.pop_back();
    }
  }

  void add(const json& j, std::optional<std::size_t> parent, int depth) {
    CeeNode n;
    n.name = detail::string_field(j, "name");
    n.scenario = detail::string_field(j, "scenario");
    n.property = detail::string_field(j, "property");
    n.depth = depth;
    if (parent) n.parent = nodes_[*parent].name;
    if (j.contains("info")) {
      const json& info = j.at("info");
      n.info.definition = detail::string_field(info, "definition");
      n.info.reasons = detail::string_field(info, "reasons");
      n.info.dangerous_operations = detail::string_field(info, "dangerous_operations");
      n.info.sample_code = detail::string_field(info, "sample_code");
      n.info.handle_code = detail::string_field(info, "handle_code");
      n.info.handle_logic = detail::string_field(info, "handle_logic");
    }
    const std::size_t self = nodes_.size();
    index_.emplace(n.name, self);
    nodes_.push_back(std::move(n));
    if (parent) nodes_[*parent].children.push_back(nodes_[self].name);
    if (j.contains("children")) {
      for (const json& child : j.at("children")) add(child, self, depth + 1);
    }
  }

  void collect(const CeeNode& n, std::vector<std::string>& out) const {
    out.push_back(n.name);
    for (const std::string& c : n.children) collect(node(c), out);
  }

  json node_json(const CeeNode& n) const {
    json children = json::array();
    for (const std::string& c : n.children) children.push_back(node_json(node(c)));
    return json{{"name", n.name},
                {"children", std::move(children)},
                {"info",
                 {{"definition", n.info.definition},
                  {"reasons", n.info.reasons},
                  {"dangerous_operations", n.info.dangerous_operations},
                  {"sample_code", n.info.sample_code},
                  {"handle_code", n.info.handle_code},
                  {"handle_logic", n.info.handle_logic}}},
                {"scenario", n.scenario},
                {"property", n.property}};
  }

  // Keywords come from two places: identifiers with an inner capital or
  // `Type.member` references in the dangerous_operations prose, and
  // constructor/static/camel-case calls in sample_code.
  void derive_keywords() {
    for (const CeeNode& n : nodes_) {
      std::set<ApiKeyword> found;
      const std::string& prose = n.info.dangerous_operations;
      std::vector<javasrc::Identifier> words = javasrc::identifiers(prose);
      std::set<std::size_t> consumed;
      for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        const auto& a = words[i];
        const auto& b = words[i + 1];
        const std::size_t dot = a.offset + a.text.size();
        if (dot < prose.size() && prose[dot] == '.' && b.offset == dot + 1 &&
            std::isupper(static_cast<unsigned char>(a.text[0])) &&
            std::islower(static_cast<unsigned char>(b.text[0]))) {
          found.insert({b.text, a.text});
          consumed.insert(i + 1);
        }
      }
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (consumed.count(i)) continue;
        if (javasrc::has_internal_upper(words[i].text)) found.insert({words[i].text, {}});
      }
      const std::string masked = javasrc::mask(n.info.sample_code);
      for (const javasrc::CallToken& call : javasrc::call_tokens(masked)) {
        std::size_t k = call.offset;
        while (k > 0 && std::isspace(static_cast<unsigned char>(masked[k - 1]))) --k;
        const bool constructed = k >= 3 && masked.compare(k - 3, 3, "new") == 0;
        if (constructed) {
          found.insert({call.name, {}});
        } else if (!call.qualifier.empty() && std::isupper(static_cast<unsigned char>(call.qualifier[0]))) {
          found.insert({call.name, call.qualifier});
        } else if (javasrc::has_internal_upper(call.name)) {
          found.insert({call.name, {}});
        }
      }
      for (const ApiKeyword& k : found) {
        if (contains(k.name) || detail::keyword_noise().count(k.name)) continue;
        if (javasrc::java_keywords().count(k.name)) continue;
        keywords_[k].insert(n.name);
      }
    }
  }

  static std::string make_template(const CeeNode& source, const std::string& type_name) {
    const std::vector<javasrc::TryRegion> regions = javasrc::scan_try_blocks(source.info.handle_code);
    const javasrc::CatchClause* chosen = nullptr;
    for (const javasrc::TryRegion& r : regions) {
      for (const javasrc::CatchClause& c : r.catches) {
        if (!chosen) chosen = &c;
        if (std::find(c.types.begin(), c.types.end(), source.name) != c.types.end()) {
          chosen = &c;
          break;
        }
      }
    }
    std::string variable = "ex";
    std::vector<std::string> body;
    if (chosen) {
      if (!chosen->variable.empty()) variable = chosen->variable;
      for (const std::string& line : javasrc::split_lines(chosen->body)) {
        std::string t = javasrc::trim(line);
        if (!t.empty()) body.push_back(std::move(t));
      }
    }
    if (body.empty()) body.push_back("System.err.println(\"" + type_name + ": \" + " + variable + ".getMessage());");
    std::string out = "try {\n" + std::string(kFragilePlaceholder) + "\n} catch (" + type_name + " " + variable + ") {\n";
    for (const std::string& line : body) out += "    " + line + "\n";
    out += "}";
    return out;
  }

  std::vector<CeeNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<ApiKeyword, std::set<std::string>> keywords_;
};

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, origin + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline CeeTree load_cee(const std::string& path, Strictness strictness = Strictness::lenient,
                        std::vector<std::string>* warnings = nullptr) {
  return CeeTree::from_json(parse_json_text(read_file(path), path), strictness, warnings);
}

inline bool is_subtype(std::string_view child, std::string_view ancestor, const CeeTree& tree) {
  return tree.is_subtype(child, ancestor);
}
inline std::string branch_of(std::string_view name, const CeeTree& tree) { return tree.branch_of(name); }
inline TreeStats stats(const CeeTree& tree) { return tree.stats(); }
inline HandlingStrategy strategy_of(std::string_view name, const CeeTree& tree) { return tree.strategy_of(name); }

/// Owners of dangerous-API calls on each line of `code` (1-based lines,
/// relative to the text). Lines without hits are absent.
inline std::map<int, std::set<std::string>> api_hits(const CeeTree& tree, std::string_view code) {
  const std::string masked = javasrc::mask(code);
  const javasrc::LineIndex index(masked);
  std::map<int, std::set<std::string>> out;
  for (const javasrc::CallToken& call : javasrc::call_tokens(masked)) {
    std::set<std::string> owners = tree.owners_of(call);
    if (owners.empty()) continue;
    out[index.line_of(call.offset)].merge(owners);
  }
  return out;
}

/// Subtype-or-equal, tolerating names missing from the tree (they only
/// match themselves).
inline bool is_same_or_subtype(const CeeTree& tree, std::string_view child, std::string_view ancestor) {
  if (child == ancestor) return true;
  if (!tree.contains(child) || !tree.contains(ancestor)) return false;
  return tree.is_subtype(child, ancestor);
}

}  // namespace exguard::cee
