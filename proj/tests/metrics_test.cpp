// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "exguard/metrics.hpp"
#include "test_util.hpp"

using namespace exguard;
using namespace exguard::metrics;
using exguard::testing::bundled_tree;

namespace {

// Plain recursion over the three edit choices; a shared first character is
// taken for free, which never loses optimality.
std::size_t lev_oracle(std::string_view a, std::string_view b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  if (a.front() == b.front()) return lev_oracle(a.substr(1), b.substr(1));
  return 1 + std::min({lev_oracle(a.substr(1), b), lev_oracle(a, b.substr(1)), lev_oracle(a.substr(1), b.substr(1))});
}

std::vector<std::string> strings_upto(int n) {
  std::vector<std::string> out{""};
  std::vector<std::string> layer{""};
  for (int len = 1; len <= n; ++len) {
    std::vector<std::string> next;
    for (const std::string& s : layer) {
      for (char c : std::string("abc")) next.push_back(s + c);
    }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

std::shared_ptr<const cee::CeeTree> shared_tree() {
  static auto tree = std::make_shared<const cee::CeeTree>(bundled_tree());
  return tree;
}

class Canned final : public llm::CompletionBackend {
 public:
  explicit Canned(std::string reply) : reply_(std::move(reply)) {}
  llm::Completion complete(const std::string&) override {
    ++calls;
    llm::Completion c;
    c.raw = reply_;
    c.attempts = 1;
    return c;
  }
  int calls = 0;

 private:
  std::string reply_;
};

const char* kGoodBlock =
    "try {\n"
    "    FileReader fileReader = new FileReader(fileName);\n"
    "} catch (IOException ex) {\n"
    "    System.out.println(\"An error occurred: \" + ex.getMessage());\n"
    "    ex.printStackTrace();\n"
    "}";

}  // namespace

TEST(Levenshtein, MatchesRecursionOracleExhaustively) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::string> all = strings_upto(5);
  ASSERT_EQ(all.size(), 364u);
  std::size_t pairs = 0;
  for (const std::string& a : all) {
    for (const std::string& b : all) {
      ASSERT_EQ(levenshtein(a, b), lev_oracle(a, b)) << a << " / " << b;
      ++pairs;
    }
  }
  EXPECT_EQ(pairs, 364u * 364u);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("same", "same"), 0u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("abc", ""), 3u);
}

TEST(Levenshtein, IsAMetric) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> len(0, 8), ch(0, 3);
  auto word = [&] {
    std::string s(len(rng), 'a');
    for (char& c : s) c = static_cast<char>('a' + ch(rng));
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    const std::string a = word(), b = word(), c = word();
    EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
    EXPECT_EQ(levenshtein(a, b) == 0, a == b);
    EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
  }
}

TEST(EditSimilarity, Examples) {
  EXPECT_EQ(edit_similarity("abc", "abd"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(edit_similarity("x = 1;", "x = 1;"), 1.0);
  EXPECT_DOUBLE_EQ(edit_similarity("", "abc"), 0.0);
  const EditScore empty = edit_score("", "");
  EXPECT_TRUE(empty.both_empty);
  EXPECT_DOUBLE_EQ(empty.value(), 1.0);
}

TEST(EditSimilarity, NormalizesIncidentalWhitespace) {
  const std::string a = "int a = 1;\n\n\n\nint b = 2;\n";
  const std::string b = "int a = 1;   \n\nint b = 2;";
  EXPECT_DOUBLE_EQ(edit_similarity(a, b), 1.0);
  EXPECT_LT(edit_similarity(a, b, /*raw=*/true), 1.0);
  EXPECT_EQ(normalize_code("\n\nx;\n\n"), "x;");
}

TEST(EditSimilarity, SymmetricAndBounded) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> len(0, 12), ch(0, 4);
  const std::string alphabet = "ab \n;";
  for (int i = 0; i < 1000; ++i) {
    std::string a(len(rng), ' '), b(len(rng), ' ');
    for (char& c : a) c = alphabet[ch(rng)];
    for (char& c : b) c = alphabet[ch(rng)];
    const double s = edit_similarity(a, b);
    EXPECT_DOUBLE_EQ(s, edit_similarity(b, a));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Coverage, Examples) {
  const std::vector<Span> s{{1, 2}, {4, 4}, {6, 9}, {11, 12}};
  EXPECT_DOUBLE_EQ(*cov(s, s), 100.0);
  EXPECT_DOUBLE_EQ(*cov(s, {{1, 2}, {4, 4}, {6, 9}, {11, 13}}), 75.0);
  std::vector<Span> more = s;
  more.push_back({20, 22});
  EXPECT_DOUBLE_EQ(*cov(s, more), 100.0);
  EXPECT_FALSE(cov({}, s).has_value());
}

TEST(CoveragePass, Examples) {
  const std::vector<Span> t{{1, 2}, {4, 4}, {6, 9}, {11, 12}};
  const std::vector<Span> detected{{1, 2}, {4, 4}, {6, 9}, {30, 31}, {40, 41}};
  const SpanCounts c = count_spans(t, detected);
  EXPECT_EQ(c.actual, 4u);
  EXPECT_EQ(c.detected, 5u);
  EXPECT_EQ(c.matched, 3u);
  EXPECT_DOUBLE_EQ(*cov_p(t, detected), 50.0);
  EXPECT_DOUBLE_EQ(*cov_p(t, t), 100.0);
  std::vector<Span> shifted;
  for (const Span& s : t) shifted.push_back({s.start + 1, s.end + 1});
  EXPECT_DOUBLE_EQ(*cov_p(t, shifted), 0.0);
  EXPECT_FALSE(cov_p({}, t).has_value());
}

TEST(CoveragePass, HundredExactlyForEqualSets) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> count(1, 5), line(1, 6);
  auto spans = [&] {
    std::vector<Span> v;
    for (int i = count(rng); i > 0; --i) {
      const int a = line(rng);
      v.push_back({a, a + line(rng) % 2});
    }
    return v;
  };
  for (int i = 0; i < 1000; ++i) {
    const std::vector<Span> t = spans(), d = spans();
    const double v = *cov_p(t, d);
    EXPECT_LE(v, 100.0);
    const bool same = std::set<Span>(t.begin(), t.end()) == std::set<Span>(d.begin(), d.end());
    EXPECT_EQ(v == 100.0, same);
  }
}

TEST(Accuracy, SubclassDirection) {
  const cee::CeeTree& tree = bundled_tree();
  EXPECT_DOUBLE_EQ(*acc({"IOException"}, {"FileNotFoundException"}, tree), 100.0);
  EXPECT_DOUBLE_EQ(*acc({"FileNotFoundException"}, {"IOException"}, tree), 0.0);
  EXPECT_DOUBLE_EQ(*acc({"SQLException", "IOException"}, {"SQLException", "IOException"}, tree), 100.0);
  EXPECT_FALSE(acc({"IOException"}, {}, tree).has_value());
  EXPECT_DOUBLE_EQ(*acc({"MadeUpException"}, {"MadeUpException"}, tree), 100.0);
}

TEST(Accuracy, AddingUnrelatedTypeNeverHelps) {
  const cee::CeeTree& tree = bundled_tree();
  const std::vector<std::string> names = tree.names();
  std::mt19937 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    const std::set<std::string> e{names[pick(rng)], names[pick(rng)]};
    std::set<std::string> d{names[pick(rng)], names[pick(rng)]};
    const double before = *acc(e, d, tree);
    const std::string extra = names[pick(rng)];
    if (d.count(extra) || type_correct(extra, e, tree)) continue;
    d.insert(extra);
    EXPECT_LE(*acc(e, d, tree), before);
  }
}

TEST(Acrs, Examples) {
  EXPECT_DOUBLE_EQ(acrs({{"a", 2, 1, 2}, {"b", 1, 1, 1}}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(acrs({{"a", 1, 4, 4}}), 1.0);
  EXPECT_DOUBLE_EQ(acrs({{"a", 2, 0, 3}, {"b", 1, 0, 1}}), 0.0);
  EXPECT_THROW(acrs({}), Error);
  EXPECT_THROW(acrs({{"a", 1, 2, 1}}), Error);
}

TEST(Acrs, RuleTableChecks) {
  EXPECT_NO_THROW(check_rules(default_rules()));
  EXPECT_THROW(check_rules({{"made-up", 1}}), Error);
  EXPECT_THROW(check_rules({{"logging", 0}}), Error);
  EXPECT_THROW(check_rules({{"logging", 1}, {"logging", 2}}), Error);
}

TEST(Acrs, ReviewOfTemplateBlock) {
  const Tallies t = review_block(kGoodBlock, bundled_tree());
  EXPECT_EQ(t.at("specific-catch").q, 1u);
  EXPECT_EQ(t.at("non-empty-catch").q, 1u);
  EXPECT_EQ(t.at("catch-order").q, 1u);
  EXPECT_EQ(t.at("logging").q, 1u);
  EXPECT_EQ(t.at("no-swallowed-rethrow").max, 0u);
  EXPECT_EQ(t.at("brace-balance").q, 1u);
  EXPECT_DOUBLE_EQ(*acrs_of(t, default_rules()), 1.0);
}

TEST(Acrs, ReviewFlagsEachRule) {
  const std::string bad =
      "try {\n"
      "    Reader r = new FileReader(name);\n"
      "} catch (Exception e) {\n"
      "} catch (IOException e) {\n"
      "    throw new IllegalStateException(\"read failed\");\n"
      "}";
  const Tallies t = review_block(bad, bundled_tree());
  EXPECT_EQ(t.at("specific-catch").q, 1u);
  EXPECT_EQ(t.at("specific-catch").max, 2u);
  EXPECT_EQ(t.at("non-empty-catch").q, 1u);
  EXPECT_EQ(t.at("catch-order").q, 0u);
  EXPECT_EQ(t.at("logging").q, 0u);
  EXPECT_EQ(t.at("no-swallowed-rethrow").q, 0u);
  EXPECT_EQ(t.at("no-swallowed-rethrow").max, 1u);
  const Tallies kept = review_block(
      "try {\n  run();\n} catch (IOException e) {\n  throw new IllegalStateException(\"x\", e);\n}", bundled_tree());
  EXPECT_EQ(kept.at("no-swallowed-rethrow").q, 1u);
  EXPECT_EQ(review_block("try {\n  run();\n", bundled_tree()).at("brace-balance").q, 0u);
}

TEST(Judge, MockVerdicts) {
  llm::MockBackend mock(shared_tree());
  EXPECT_FALSE(judge("try {\n  run();\n} catch (Exception e) {}", bundled_tree(), mock).good);
  const Verdict v = judge(kGoodBlock, bundled_tree(), mock);
  EXPECT_TRUE(v.good);
  EXPECT_FALSE(v.degraded);
}

TEST(Judge, MalformedRepliesDegrade) {
  Canned garbage("I think it is fine");
  const Verdict v = judge(kGoodBlock, bundled_tree(), garbage, 2);
  EXPECT_EQ(garbage.calls, 3);
  EXPECT_TRUE(v.degraded);
  EXPECT_TRUE(v.good);
  Canned odd(R"({"verdict": "maybe"})");
  EXPECT_TRUE(judge(kGoodBlock, bundled_tree(), odd).degraded);
  Canned bad(R"({"verdict": "bad", "reason": "style"})");
  const Verdict b = judge(kGoodBlock, bundled_tree(), bad);
  EXPECT_FALSE(b.good);
  EXPECT_FALSE(b.degraded);
}

TEST(Crs, Examples) {
  EXPECT_DOUBLE_EQ(*crs(3, 4), 75.0);
  EXPECT_DOUBLE_EQ(*crs(4, 4), 100.0);
  EXPECT_DOUBLE_EQ(*crs(0, 4), 0.0);
  EXPECT_FALSE(crs(0, 0).has_value());
}

namespace {

GroundTruth truth(const std::string& name) {
  GroundTruth g;
  g.name = name;
  g.sensitive = {{3, 3}, {5, 6}};
  g.try_spans = {{3, 3}, {5, 6}};
  g.types = {"IOException"};
  g.reference = "class A {\n" + std::string(kGoodBlock) + "\n}\n";
  return g;
}

Detections perfect(const GroundTruth& g) {
  Detections d;
  d.name = g.name;
  d.segments = g.sensitive;
  d.try_spans = g.try_spans;
  d.types = g.types;
  d.generated = *g.reference;
  d.blocks = {kGoodBlock};
  return d;
}

}  // namespace

TEST(Evaluate, PerfectDetections) {
  llm::MockBackend mock(shared_tree());
  const std::vector<GroundTruth> t{truth("a.java"), truth("b.java")};
  const EvaluationReport r = evaluate(t, {perfect(t[1]), perfect(t[0])}, bundled_tree(), default_rules(), mock, 4);
  EXPECT_DOUBLE_EQ(*r.cov, 100.0);
  EXPECT_DOUBLE_EQ(*r.cov_p, 100.0);
  EXPECT_DOUBLE_EQ(*r.acc, 100.0);
  EXPECT_DOUBLE_EQ(*r.es, 1.0);
  EXPECT_DOUBLE_EQ(*r.crs, 100.0);
  EXPECT_DOUBLE_EQ(*r.acrs, 1.0);
  EXPECT_EQ(r.tp, 4u);
  EXPECT_EQ(r.fp, 0u);
  EXPECT_EQ(r.n_total, 2u);
  ASSERT_EQ(r.files.size(), 2u);
  EXPECT_EQ(r.files[0].name, "a.java");
}

TEST(Evaluate, EmptyDetections) {
  llm::MockBackend mock(shared_tree());
  Detections d;
  d.name = "a.java";
  const EvaluationReport r = evaluate({truth("a.java")}, {d}, bundled_tree(), default_rules(), mock);
  EXPECT_DOUBLE_EQ(*r.cov, 0.0);
  EXPECT_DOUBLE_EQ(*r.cov_p, 0.0);
  EXPECT_FALSE(r.acc.has_value());
  EXPECT_FALSE(r.crs.has_value());
  EXPECT_FALSE(r.acrs.has_value());
  EXPECT_EQ(r.fn, 2u);
  EXPECT_TRUE(to_json(r)["acc"].is_null());
}

TEST(Evaluate, MicroEqualsPerFileForOneFile) {
  llm::MockBackend mock(shared_tree());
  const GroundTruth g = truth("a.java");
  Detections d = perfect(g);
  d.segments = {{3, 3}, {9, 9}};
  d.try_spans = {{3, 3}, {5, 7}};
  d.types = {"FileNotFoundException", "SQLException"};
  const EvaluationReport r = evaluate({g}, {d}, bundled_tree(), default_rules(), mock);
  const json file = to_json(r)["files"][0];
  EXPECT_DOUBLE_EQ(*r.cov, file["cov"].get<double>());
  EXPECT_DOUBLE_EQ(*r.cov_p, file["cov_p"].get<double>());
  EXPECT_DOUBLE_EQ(*r.acc, file["acc"].get<double>());
  EXPECT_DOUBLE_EQ(*r.acc, 50.0);
  EXPECT_DOUBLE_EQ(*r.cov_p, 100.0 / 3.0);
}

TEST(Evaluate, KeyMismatchNamesFiles) {
  llm::MockBackend mock(shared_tree());
  Detections d = perfect(truth("b.java"));
  try {
    evaluate({truth("a.java")}, {d}, bundled_tree(), default_rules(), mock);
    FAIL() << "expected key mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::key_mismatch);
    EXPECT_NE(std::string(e.what()).find("a.java"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("b.java"), std::string::npos);
  }
}

TEST(GroundTruthFile, LoadsSidecar) {
  const auto dir = std::filesystem::temp_directory_path() / "exguard_metrics_gt";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "A.java") << "class A {\n  void f() {\n    g();\n  }\n}\n";
  std::ofstream(dir / "A.ref") << "handled\n";
  std::ofstream(dir / "A.expect.json")
      << R"({"sensitive_spans": [[3,3]], "try_spans": [[3,3]], "exception_types": ["IOException", "Nope"],
            "reference_path": "A.ref"})";
  const GroundTruth g = load_ground_truth((dir / "A.java").string(), "A.java", bundled_tree());
  EXPECT_EQ(g.sensitive, (std::vector<Span>{{3, 3}}));
  EXPECT_EQ(g.types.size(), 2u);
  EXPECT_EQ(g.unknown_types, (std::vector<std::string>{"Nope"}));
  EXPECT_EQ(*g.reference, "handled\n");

  std::ofstream(dir / "A.expect.json") << R"({"sensitive_spans": [[3,30]]})";
  EXPECT_THROW(load_ground_truth((dir / "A.java").string(), "A.java", bundled_tree()), Error);
  std::filesystem::remove(dir / "A.expect.json");
  try {
    load_ground_truth((dir / "A.java").string(), "A.java", bundled_tree());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
  std::filesystem::remove_all(dir);
}

TEST(Report, TableHasCorpusRow) {
  llm::MockBackend mock(shared_tree());
  const GroundTruth g = truth("a.java");
  const EvaluationReport r = evaluate({g}, {perfect(g)}, bundled_tree(), default_rules(), mock);
  const std::string table = render_table(r);
  EXPECT_NE(table.find("(corpus)"), std::string::npos);
  EXPECT_NE(table.find("100.0%"), std::string::npos);
}
