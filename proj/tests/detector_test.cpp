// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "exguard/detector.hpp"
#include "exguard/mock_backend.hpp"
#include "java_gen.hpp"
#include "test_util.hpp"

using namespace exguard;
using namespace exguard::detector;
using exguard::testing::bundled_tree;

namespace {

planner::CodeUnit unit_of(const std::string& text, int start = 1) {
  planner::CodeUnit u;
  u.path = "T.java";
  u.lines = javasrc::split_lines(text);
  u.start = start;
  u.end = start + static_cast<int>(u.lines.size()) - 1;
  u.id = planner::unit_id(u.path, u.start, u.end);
  return u;
}

std::shared_ptr<const cee::CeeTree> shared_tree() {
  static auto tree = std::make_shared<const cee::CeeTree>(bundled_tree());
  return tree;
}

SensitiveSegment seg(int a, int b, std::set<Origin> o = {Origin::static_analysis}, std::set<std::string> h = {}) {
  return {"u", a, b, std::move(o), std::move(h)};
}

}  // namespace

TEST(Epg, FileReaderIsApiCallSite) {
  const auto u = unit_of("void f(String name) {\n  Reader r = new FileReader(name);\n}\n");
  const Epg epg = build_epg(u, bundled_tree());
  bool found = false;
  for (std::size_t i = 0; i < epg.sites.size(); ++i) {
    const Site& s = epg.sites[i];
    if (s.origin == SiteOrigin::api_call && s.keyword == "FileReader") {
      EXPECT_EQ(s.line, 2);
      EXPECT_EQ(bundled_tree().branch_of(s.type), "IOException");
      EXPECT_TRUE(epg.unhandled(i));
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Epg, NoSitesWithoutCallsOrThrows) {
  const auto u = unit_of("int add(int a, int b) {\n  int c = a + b;\n  return c;\n}\n");
  EXPECT_TRUE(build_epg(u, bundled_tree()).sites.empty());
}

TEST(Epg, ThrowRoutesToNearestCatchingSupertype) {
  const auto u = unit_of(
      "void f() {\n"
      "  try {\n"
      "    try {\n"
      "      throw new IllegalStateException(\"x\");\n"
      "    } catch (IOException e) {\n"
      "      log(e);\n"
      "    }\n"
      "  } catch (RuntimeException e) {\n"
      "    log(e);\n"
      "  }\n"
      "}\n");
  const Epg epg = build_epg(u, bundled_tree());
  ASSERT_EQ(epg.sites.size(), 1u);
  EXPECT_EQ(epg.sites[0].origin, SiteOrigin::throw_stmt);
  EXPECT_EQ(epg.sites[0].type, "IllegalStateException");
  EXPECT_EQ(epg.edges[0].target, Target::catch_clause);
  EXPECT_EQ(epg.edges[0].catch_type, "RuntimeException");
  EXPECT_EQ(epg.edges[0].catch_line, 8);
}

TEST(Epg, ThrowsClauseIsDeclared) {
  const auto u = unit_of("void f() throws java.io.IOException, InterruptedException {\n  x();\n}\n", 20);
  const Epg epg = build_epg(u, bundled_tree());
  ASSERT_EQ(epg.sites.size(), 2u);
  EXPECT_EQ(epg.sites[0].type, "IOException");
  EXPECT_EQ(epg.sites[0].line, 20);
  for (const auto& e : epg.edges) EXPECT_EQ(e.target, Target::declared);
}

TEST(Static, UnguardedFileReaderGivesOneSegment) {
  const auto u = unit_of("void f(String name) {\n  int n = 0;\n  Reader r = new FileReader(name);\n  n++;\n}\n", 10);
  const auto segs = detect_static(u, bundled_tree());
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].start, 12);
  EXPECT_EQ(segs[0].end, 12);
  EXPECT_EQ(segs[0].hints, (std::set<std::string>{"IOException"}));
  EXPECT_EQ(segs[0].origins, (std::set<Origin>{Origin::static_analysis}));
}

TEST(Static, GuardedLineGivesNothing) {
  const auto u = unit_of(
      "void f(String name) {\n  try {\n    Reader r = new FileReader(name);\n  } catch (IOException e) {\n    log(e);\n  }\n}\n");
  EXPECT_TRUE(detect_static(u, bundled_tree()).empty());
}

TEST(Static, SafeLineSplitsRuns) {
  const auto u = unit_of(
      "void f(String name) throws Exception {\n  Reader r = new FileReader(name);\n  int n = 1;\n  Thread.sleep(n);\n}\n");
  const auto segs = detect_static(u, bundled_tree());
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].start, 2);
  EXPECT_EQ(segs[1].start, 4);
  EXPECT_EQ(segs[1].hints, (std::set<std::string>{"InterruptedException"}));
}

TEST(Static, HintsResolveAndRunIsDeterministic) {
  exguard::testing::JavaGen gen(7);
  for (int i = 0; i < 200; ++i) {
    const auto u = unit_of(gen.file(gen.pick(1, 4)));
    const auto a = detect_static(u, bundled_tree());
    EXPECT_EQ(a, detect_static(u, bundled_tree()));
    for (const auto& s : a) {
      EXPECT_TRUE(u.contains(s.start) && u.contains(s.end) && s.start <= s.end);
      for (const auto& h : s.hints) EXPECT_EQ(bundled_tree().branch_of(h), h);
    }
  }
}

TEST(Match, MockLabelsFileReaderLine) {
  llm::MockBackend mock(shared_tree());
  const auto u = unit_of("void f(String name) {\n  Reader r = new FileReader(name);\n}\n", 5);
  const MatchResult r = detect_match(u, bundled_tree(), mock);
  EXPECT_FALSE(r.degraded());
  EXPECT_EQ(mock.calls(), 2);
  ASSERT_EQ(r.segments.size(), 2u);
  for (const auto& s : r.segments) {
    EXPECT_EQ(s.start, 6);
    EXPECT_EQ(s.hints, (std::set<std::string>{"IOException"}));
  }
  const auto merged = merge({}, r.segments);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].origins, (std::set<Origin>{Origin::scenario_match, Origin::property_match}));
}

TEST(Match, NoneLabelsGiveNothing) {
  llm::MockBackend mock(shared_tree());
  EXPECT_TRUE(detect_match(unit_of("int g() {\n  return 1;\n}\n"), bundled_tree(), mock).segments.empty());
}

TEST(Match, TwoLabelsOnOneLine) {
  llm::MockBackend mock(shared_tree());
  const auto u = unit_of("void f(String p) throws Exception {\n  Thread.sleep(Integer.parseInt(p));\n}\n");
  const auto segs = merge({}, detect_match(u, bundled_tree(), mock).segments);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].hints, (std::set<std::string>{"InterruptedException", "RuntimeException"}));
}

TEST(Match, BackendFailureIsDegradedNotFatal) {
  class Failing final : public llm::CompletionBackend {
   public:
    llm::Completion complete(const std::string&) override { throw Error(ErrorCode::backend, "down"); }
  } failing;
  const MatchResult r = detect_match(unit_of("new FileReader(x);\n"), bundled_tree(), failing);
  EXPECT_TRUE(r.segments.empty());
  EXPECT_EQ(r.degraded_calls, 2);
}

TEST(Merge, Examples) {
  const auto m = merge({seg(3, 7)}, {seg(5, 10, {Origin::scenario_match})});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].start, 3);
  EXPECT_EQ(m[0].end, 10);
  EXPECT_EQ(m[0].origins, (std::set<Origin>{Origin::static_analysis, Origin::scenario_match}));
  const auto d = merge({seg(1, 2)}, {seg(9, 9)});
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0], seg(1, 2));
  EXPECT_EQ(d[1], seg(9, 9));
  EXPECT_TRUE(merge({}, {}).empty());
  EXPECT_EQ(merge({seg(1, 2)}, {seg(4, 4)}).size(), 1u);  // one-line gap
  EXPECT_EQ(merge({seg(1, 2)}, {seg(5, 5)}).size(), 2u);
}

TEST(Merge, MixedUnitsRejected) {
  SensitiveSegment other = seg(1, 1);
  other.unit_id = "v";
  try {
    merge({seg(1, 1)}, {other});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::mixed_unit);
  }
}

TEST(Merge, AlgebraicProperties) {
  std::mt19937 rng(11);
  auto random_set = [&] {
    std::vector<SensitiveSegment> v;
    const int n = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int i = 0; i < n; ++i) {
      const int a = std::uniform_int_distribution<int>(1, 40)(rng);
      const int b = a + std::uniform_int_distribution<int>(0, 4)(rng);
      std::set<Origin> o{static_cast<Origin>(std::uniform_int_distribution<int>(0, 2)(rng))};
      std::set<std::string> h;
      if (rng() % 2) h.insert(rng() % 2 ? "IOException" : "RuntimeException");
      v.push_back(seg(a, b, o, h));
    }
    return v;
  };
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_set(), b = random_set(), c = random_set();
    EXPECT_EQ(merge(a, b), merge(b, a));
    EXPECT_EQ(merge(merge(a, b), c), merge(a, merge(b, c)));
    const auto ab = merge(a, b);
    EXPECT_EQ(merge(ab, ab), ab);
    EXPECT_EQ(merge(ab, {}), ab);
    for (std::size_t k = 1; k < ab.size(); ++k) EXPECT_GT(ab[k].start, ab[k - 1].end + 2);
  }
}

TEST(Guard, DropsSegmentsInsideCoveringTry) {
  const auto u = unit_of(
      "void f(String name) {\n  try {\n    Reader r = new FileReader(name);\n  } catch (IOException e) {\n    log(e);\n  }\n}\n");
  const auto graph = cfg::build_cfg(u);
  EXPECT_TRUE(drop_guarded({seg(3, 3, {Origin::scenario_match}, {"IOException"})}, graph, bundled_tree()).empty());
  EXPECT_EQ(drop_guarded({seg(3, 3, {Origin::scenario_match}, {"RuntimeException"})}, graph, bundled_tree()).size(), 1u);
  EXPECT_EQ(drop_guarded({seg(1, 3, {Origin::scenario_match}, {"IOException"})}, graph, bundled_tree()).size(), 1u);
}
