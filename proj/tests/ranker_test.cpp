// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "exguard/ranker.hpp"
#include "test_util.hpp"

using namespace exguard;
using namespace exguard::ranker;
using exguard::testing::bundled_tree;

namespace {

std::shared_ptr<const cee::CeeTree> shared_tree() {
  static auto tree = std::make_shared<const cee::CeeTree>(bundled_tree());
  return tree;
}

class Canned final : public llm::CompletionBackend {
 public:
  explicit Canned(std::string reply) : reply_(std::move(reply)) {}
  llm::Completion complete(const std::string&) override {
    llm::Completion c;
    c.raw = reply_;
    c.attempts = 1;
    return c;
  }

 private:
  std::string reply_;
};

RankedException item(std::string type, double g, std::string seg = "s") {
  RankedException r;
  r.type = std::move(type);
  r.grade = g;
  r.segment = std::move(seg);
  return r;
}

std::vector<RankedException> random_items(std::mt19937& rng, const RankConfig& c) {
  static const std::vector<std::string> names = {"IOException", "SQLException", "ParseException",
                                                 "TimeoutException", "NullPointerException"};
  std::vector<RankedException> v;
  const int n = std::uniform_int_distribution<int>(0, 8)(rng);
  std::uniform_int_distribution<int> tenth(0, 10);
  for (int i = 0; i < n; ++i) {
    RankedException r;
    r.type = names[rng() % names.size()];
    r.segment = "seg" + std::to_string(rng() % 3);
    r.likelihood = tenth(rng) / 10.0;
    r.suitability = tenth(rng) / 10.0;
    r.grade = grade(r.likelihood, r.suitability, c);
    v.push_back(r);
  }
  return v;
}

std::vector<std::pair<std::string, std::string>> keys(const std::vector<RankedException>& v) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& r : v) out.emplace_back(r.type + "/" + std::to_string(r.likelihood) + "/" + std::to_string(r.suitability), r.segment);
  return out;
}

}  // namespace

TEST(Score, MockFileReaderSegment) {
  llm::MockBackend mock(shared_tree());
  const Scores s = score("IOException", "BufferedReader in = new BufferedReader(new FileReader(path));\nString line = in.readLine();",
                         {}, bundled_tree(), mock);
  EXPECT_GT(s.likelihood, 0.0);
  EXPECT_EQ(s.suitability, 1.0);
  EXPECT_FALSE(s.degraded);
}

TEST(Score, ClampsOutOfRangeValues) {
  Canned canned(R"({"Exceptions": [{"ExceptionType": "IOException", "LikelihoodScore": 1.7, "SuitabilityScore": -0.2}]})");
  const Scores s = score("IOException", "x();", {}, bundled_tree(), canned);
  EXPECT_EQ(s.likelihood, 1.0);
  EXPECT_EQ(s.suitability, 0.0);
}

TEST(Score, UnknownTypeIsPrecondition) {
  llm::MockBackend mock(shared_tree());
  try {
    score("NoSuchThingException", "x();", {}, bundled_tree(), mock);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::precondition);
  }
}

TEST(Score, BackendFailureUsesFormula) {
  Canned junk("no json here");
  const std::string code = "Reader r = new FileReader(path);";
  const Scores s = score("FileNotFoundException", code, {}, bundled_tree(), junk);
  EXPECT_TRUE(s.degraded);
  EXPECT_DOUBLE_EQ(s.likelihood, llm::mock::likelihood(bundled_tree(), "FileNotFoundException", code));
}

TEST(Grade, Examples) {
  EXPECT_DOUBLE_EQ(grade(0.8, 0.6, {}), 0.7);
  EXPECT_EQ(grade(0, 0, {}), 0.0);
  EXPECT_DOUBLE_EQ(grade(0.3, 0.9, {1.0, 0.0, 0.6}), 0.3);
  EXPECT_THROW((RankConfig{0.0, 0.0, 0.6}.validate()), Error);
  EXPECT_THROW((RankConfig{-1.0, 2.0, 0.6}.validate()), Error);
}

TEST(Rank, Examples) {
  const auto r = rank({item("A", 0.7), item("B", 0.9), item("C", 0.1)});
  EXPECT_EQ(r[0].grade, 0.9);
  EXPECT_EQ(r[1].grade, 0.7);
  EXPECT_EQ(r[2].grade, 0.1);
  const auto tie = rank({item("SQLException", 0.5), item("IOException", 0.5)});
  EXPECT_EQ(tie[0].type, "IOException");
  EXPECT_TRUE(rank({}).empty());
}

TEST(Select, StrictThreshold) {
  EXPECT_EQ(select({item("A", 0.7), item("B", 0.5)}, 0.6).size(), 1u);
  EXPECT_TRUE(select({item("A", 0.6)}, 0.6).empty());
  EXPECT_EQ(select({item("A", 0.2), item("B", 0.01)}, 0.0).size(), 2u);
}

TEST(RankProperties, PermutationScalingAndDownwardClosure) {
  std::mt19937 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const RankConfig base{std::uniform_real_distribution<double>(0.0, 1.0)(rng),
                          std::uniform_real_distribution<double>(0.01, 1.0)(rng), 0.6};
    std::vector<RankedException> items = random_items(rng, base);
    const auto ranked = rank(items);

    auto a = keys(items), b = keys(ranked);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);

    const double c = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const RankConfig scaled{base.alpha * c, base.beta * c, base.gamma};
    std::vector<RankedException> rescored = items;
    for (auto& r : rescored) r.grade = grade(r.likelihood, r.suitability, scaled);
    // Ties must stay ties under scaling; compare on the exact-grade order.
    const auto ranked_scaled = rank(rescored);
    ASSERT_EQ(ranked.size(), ranked_scaled.size());
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      EXPECT_EQ(ranked[k].type, ranked_scaled[k].type);
      EXPECT_EQ(ranked[k].likelihood, ranked_scaled[k].likelihood);
      EXPECT_EQ(ranked[k].suitability, ranked_scaled[k].suitability);
    }

    const double gamma = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto chosen = select(ranked, gamma);
    // Downward closed: exactly the ranked prefix graded above gamma.
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      EXPECT_EQ(k < chosen.size(), ranked[k].grade > gamma);
      if (k < chosen.size()) {
        EXPECT_EQ(chosen[k].type, ranked[k].type);
      }
    }
  }
}

TEST(GradeProperties, MonotoneInInputs) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const RankConfig c{u(rng), u(rng) + 0.01, 0.6};
    const double l = u(rng), s = u(rng), d = u(rng);
    EXPECT_LE(grade(l, s, c), grade(std::min(1.0, l + d), s, c));
    EXPECT_LE(grade(l, s, c), grade(l, std::min(1.0, s + d), c));
  }
}
