// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "exguard/cee.hpp"
#include "test_util.hpp"

using exguard::Error;
using exguard::ErrorCode;
using exguard::cee::CeeTree;
using exguard::cee::json;
using exguard::testing::bundled_tree;
using exguard::testing::data_path;

namespace {

json leaf(const std::string& name) {
  return {{"name", name},
          {"children", json::array()},
          {"info", {{"handle_logic", "log it"}}},
          {"scenario", "s"},
          {"property", "p"}};
}

json small_doc() {
  json root = leaf("Throwable");
  json ex = leaf("Exception");
  json io = leaf("IOException");
  io["children"].push_back(leaf("FileNotFoundException"));
  ex["children"].push_back(io);
  ex["children"].push_back(leaf("SQLException"));
  root["children"].push_back(ex);
  return root;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::io;
}

// Independent recount straight from the JSON document.
void recount(const json& j, int depth, std::size_t& nodes, std::size_t& branches, int& max_depth,
             std::set<std::string>& names) {
  ++nodes;
  names.insert(j.at("name").get<std::string>());
  if (depth == 2) ++branches;
  max_depth = std::max(max_depth, depth);
  for (const json& c : j.value("children", json::array())) recount(c, depth + 1, nodes, branches, max_depth, names);
}

}  // namespace

TEST(CeeLoad, BundledTreeIsDeskScale) {
  const auto s = bundled_tree().stats();
  EXPECT_GE(s.node_count, 30u);
  EXPECT_GE(s.branch_count, 8u);
  EXPECT_LE(s.max_depth, 5);
  EXPECT_EQ(bundled_tree().root().name, "Throwable");
}

// The validator is not tied to the desk-scale size: a full-size tree loads too.
TEST(CeeLoad, FullScaleShapeAccepted) {
  json doc = leaf("Throwable");
  doc["children"].push_back(leaf("Exception"));
  doc["children"].push_back(leaf("Error"));
  int deep = 0;
  for (int b = 0; b < 62; ++b) {
    json branch = leaf("Branch" + std::to_string(b) + "Exception");
    for (int c = 0; c < 5; ++c) {
      json child = leaf("Sub" + std::to_string(b) + "_" + std::to_string(c) + "Exception");
      if (c == 0 && deep < 29) {
        json d4 = leaf("Deep" + std::to_string(deep) + "Exception");
        d4["children"].push_back(leaf("Deeper" + std::to_string(deep) + "Exception"));
        child["children"].push_back(d4);
        ++deep;
      }
      branch["children"].push_back(child);
    }
    doc["children"][b % 2]["children"].push_back(branch);
  }
  EXPECT_TRUE(CeeTree::validate_document(doc, exguard::cee::Strictness::strict).empty());
  const auto s = CeeTree::from_json(doc, exguard::cee::Strictness::strict).stats();
  EXPECT_EQ(s.node_count, 433u);
  EXPECT_EQ(s.branch_count, 62u);
  EXPECT_EQ(s.max_depth, 5);
}

TEST(CeeLoad, StrictModeAcceptsBundledTree) {
  std::vector<std::string> warnings;
  exguard::cee::load_cee(data_path("cee.json"), exguard::cee::Strictness::strict, &warnings);
  EXPECT_TRUE(warnings.empty());
}

TEST(CeeLoad, StatsMatchRecountOracle) {
  const json doc = exguard::cee::parse_json_text(exguard::cee::read_file(data_path("cee.json")), "cee");
  std::size_t nodes = 0, branches = 0;
  int depth = 0;
  std::set<std::string> names;
  recount(doc, 0, nodes, branches, depth, names);
  const auto s = bundled_tree().stats();
  EXPECT_EQ(s.node_count, nodes);
  EXPECT_EQ(s.branch_count, branches);
  EXPECT_EQ(s.max_depth, depth);
  EXPECT_EQ(names.size(), s.node_count);
}

TEST(CeeLoad, DuplicateNameRejected) {
  json doc = small_doc();
  doc["children"][0]["children"].push_back(leaf("IOException"));
  try {
    CeeTree::from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::validation);
    EXPECT_NE(std::string(e.what()).find("duplicate name"), std::string::npos);
  }
}

TEST(CeeLoad, WrongRootRejected) {
  json doc = small_doc()["children"][0];
  try {
    CeeTree::from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("root must be Throwable"), std::string::npos);
  }
}

TEST(CeeLoad, MalformedDocumentIsParseError) {
  EXPECT_EQ(code_of([] { exguard::cee::parse_json_text("{\"name\": ", "x"); }), ErrorCode::parse);
}

TEST(CeeLoad, DepthLimitEnforced) {
  json doc = leaf("Throwable");
  json* cur = &doc;
  for (int i = 1; i <= 6; ++i) {
    (*cur)["children"].push_back(leaf("T" + std::to_string(i)));
    cur = &(*cur)["children"][0];
  }
  auto v = CeeTree::validate_document(doc, exguard::cee::Strictness::lenient);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].node, "T6");
}

TEST(CeeLoad, LeafPayloadRequired) {
  json doc = small_doc();
  doc["children"][0]["children"][1]["scenario"] = "";
  EXPECT_EQ(code_of([&] { CeeTree::from_json(doc); }), ErrorCode::validation);
}

TEST(CeeLoad, UnknownFieldStrictVersusLenient) {
  json doc = small_doc();
  doc["children"][0]["colour"] = "red";
  std::vector<std::string> warnings;
  EXPECT_NO_THROW(CeeTree::from_json(doc, exguard::cee::Strictness::lenient, &warnings));
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(code_of([&] { CeeTree::from_json(doc, exguard::cee::Strictness::strict); }), ErrorCode::validation);
}

TEST(CeeLoad, HandleCodeMustCatchOwnLineage) {
  json doc = small_doc();
  doc["children"][0]["children"][1]["info"]["handle_code"] = "try { f(); } catch (IOException e) { log(e); }";
  EXPECT_EQ(code_of([&] { CeeTree::from_json(doc); }), ErrorCode::validation);
  doc["children"][0]["children"][1]["info"]["handle_code"] = "try { f(); } catch (Exception e) { log(e); }";
  EXPECT_NO_THROW(CeeTree::from_json(doc));
}

TEST(CeeQuery, SubtypeExamples) {
  const CeeTree& t = bundled_tree();
  EXPECT_TRUE(t.is_subtype("SQLClientInfoException", "SQLException"));
  EXPECT_FALSE(t.is_subtype("IOException", "IOException"));
  EXPECT_FALSE(t.is_subtype("IOException", "RuntimeException"));
  EXPECT_EQ(code_of([&] { t.is_subtype("NoSuchThing", "IOException"); }), ErrorCode::unknown_name);
}

TEST(CeeQuery, SubtypeIsTransitiveAndIrreflexive) {
  const CeeTree& t = bundled_tree();
  const auto names = t.names();
  for (const auto& a : names) {
    EXPECT_FALSE(t.is_subtype(a, a));
    for (const auto& b : names) {
      if (!t.is_subtype(a, b)) continue;
      EXPECT_FALSE(t.is_subtype(b, a));
      for (const auto& c : names) {
        if (t.is_subtype(b, c)) {
          EXPECT_TRUE(t.is_subtype(a, c)) << a << " " << b << " " << c;
        }
      }
    }
  }
}

TEST(CeeQuery, BranchOf) {
  const CeeTree& t = bundled_tree();
  EXPECT_EQ(t.branch_of("FileNotFoundException"), "IOException");
  EXPECT_EQ(t.branch_of("IOException"), "IOException");
  EXPECT_EQ(t.branch_of("ConnectException"), "IOException");
  for (const char* shallow : {"Throwable", "Exception", "Error"}) {
    EXPECT_EQ(code_of([&] { t.branch_of(shallow); }), ErrorCode::depth_too_shallow);
  }
  for (const auto& n : t.nodes()) {
    if (n.depth < 2) continue;
    EXPECT_EQ(t.branch_of(t.branch_of(n.name)), t.branch_of(n.name));
  }
}

TEST(CeeQuery, StatsTrivialTree) {
  json doc = leaf("Throwable");
  doc["children"].push_back(leaf("Exception"));
  doc["scenario"] = "";
  const auto s = CeeTree::from_json(doc).stats();
  EXPECT_EQ(s, (exguard::cee::TreeStats{2, 0, 1}));
}

TEST(CeeQuery, StrategyOfSampleNode) {
  const auto s = bundled_tree().strategy_of("IOException");
  EXPECT_EQ(s.type_name, "IOException");
  EXPECT_EQ(s.handle_logic.rfind("Try the codes attempting", 0), 0u);
  EXPECT_NE(s.handle_code.find("catch (IOException ex)"), std::string::npos);
  EXPECT_NE(s.handle_code.find(exguard::cee::kFragilePlaceholder), std::string::npos);
}

TEST(CeeQuery, StrategyInheritsTemplate) {
  json doc = small_doc();
  doc["children"][0]["children"][0]["info"]["handle_code"] =
      "try { read(); } catch (IOException e) { log(e); }";
  const CeeTree t = CeeTree::from_json(doc);
  const auto s = t.strategy_of("FileNotFoundException");
  EXPECT_EQ(s.type_name, "FileNotFoundException");
  EXPECT_EQ(s.source_node, "IOException");
  EXPECT_NE(s.handle_code.find("catch (FileNotFoundException e)"), std::string::npos);
  EXPECT_NE(s.handle_code.find("log(e);"), std::string::npos);
  EXPECT_EQ(code_of([&] { t.strategy_of("Nope"); }), ErrorCode::unknown_name);
}

TEST(CeeQuery, NoStrategyAboveDepthOne) {
  json doc = leaf("Throwable");
  json ex = leaf("Exception");
  ex["info"]["handle_logic"] = "";
  ex["children"].push_back(leaf("IOException"));
  doc["children"].push_back(ex);
  const CeeTree t = CeeTree::from_json(doc);
  EXPECT_EQ(code_of([&] { t.strategy_of("Throwable"); }), ErrorCode::no_strategy);
  EXPECT_NO_THROW(t.strategy_of("IOException"));
}

TEST(CeeQuery, EveryBundledExceptionHasTemplate) {
  for (const auto& n : bundled_tree().nodes()) {
    if (!bundled_tree().is_subtype(n.name, "Exception")) continue;
    const auto s = bundled_tree().strategy_of(n.name);
    EXPECT_FALSE(s.handle_code.empty()) << n.name;
  }
}

TEST(CeeKeywords, DerivedFromPayload) {
  const CeeTree& t = bundled_tree();
  exguard::javasrc::CallToken reader{"FileReader", "", 0};
  EXPECT_TRUE(t.owners_of(reader).count("IOException"));
  exguard::javasrc::CallToken parse{"parseInt", "Integer", 0};
  EXPECT_TRUE(t.owners_of(parse).count("NumberFormatException"));
  exguard::javasrc::CallToken noise{"println", "out", 0};
  EXPECT_TRUE(t.owners_of(noise).empty());
}

TEST(CeeSerialize, RoundTrip) {
  const CeeTree& t = bundled_tree();
  const CeeTree back = CeeTree::from_json(t.to_json());
  EXPECT_EQ(back.stats(), t.stats());
  EXPECT_EQ(back.names(), t.names());
  EXPECT_EQ(back.keywords(), t.keywords());
}
