#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "sfperc/tree.hpp"

using namespace sfperc;

namespace {

Tree make(std::vector<Vertex> parents) { return Tree(std::move(parents)); }

}  // namespace

TEST(AttachProb, TwoVertexTreeIsSymmetric) {
  for (double beta : {-0.5, 0.0, 1.0, 7.0}) {
    EXPECT_DOUBLE_EQ(attach_prob(Tree(), 0, beta), 0.5);
    EXPECT_DOUBLE_EQ(attach_prob(Tree(), 1, beta), 0.5);
  }
}

TEST(AttachProb, HandEvaluated) {
  const Tree star = make({0, 0});
  EXPECT_DOUBLE_EQ(attach_prob(star, 0, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(attach_prob(star, 1, 0.0), 0.25);

  const Tree t = make({0, 0, 1});
  EXPECT_DOUBLE_EQ(attach_prob(t, 1, 1.0), 0.3);
  double sum = 0.0;
  for (Vertex i = 0; i < t.vertices(); ++i) sum += attach_prob(t, i, 1.0);
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(AttachProb, OutOfRange) { EXPECT_THROW(attach_prob(Tree(), 2, 0.0), std::domain_error); }

TEST(Tree, RejectsBadParents) {
  EXPECT_ANY_THROW(make({1}));
  EXPECT_ANY_THROW(make({0, 3}));
}

TEST(GrowTree, SmallestTree) {
  for (std::uint64_t seed : {0, 1, 99}) {
    Rng rng(seed);
    const Tree t = grow_tree({0.3, 1}, rng);
    EXPECT_EQ(t, Tree());
  }
}

TEST(GrowTree, DeterministicPerSeed) {
  Rng a(42), b(42), c(43);
  const Tree ta = grow_tree({0.0, 5}, a);
  EXPECT_EQ(ta, grow_tree({0.0, 5}, b));
  EXPECT_EQ(ta.vertices(), 6u);
  Tree tc = grow_tree({0.0, 500}, c);
  Rng a2(42);
  EXPECT_NE(tc, grow_tree({0.0, 500}, a2));
}

TEST(GrowTree, ValidatesParams) {
  Rng rng(1);
  EXPECT_THROW(grow_tree({-1.0, 5}, rng), std::domain_error);
  EXPECT_THROW(grow_tree({0.0, 0}, rng), std::domain_error);
}

TEST(GrowTree, DegreeSumAndParentOrder) {
  for (double beta : {-0.9, -0.3, 0.0, 2.5}) {
    Rng rng(7);
    const Tree t = grow_tree({beta, 2000}, rng);
    const auto& d = t.degrees();
    EXPECT_EQ(std::accumulate(d.begin(), d.end(), 0u), 2 * t.edges());
    for (Vertex j = 1; j < t.vertices(); ++j) ASSERT_LT(t.parent(j), j);
  }
}

TEST(GrowTree, SecondVertexAttachesToRootHalfTheTime) {
  constexpr int kRuns = 1'000'000;
  int hits = 0;
  for (int s = 0; s < kRuns; ++s) {
    Rng rng(s);
    hits += grow_tree({0.0, 3}, rng).parent(2) == 0;
  }
  EXPECT_NEAR(static_cast<double>(hits) / kRuns, 0.5, 0.002);
}

TEST(GrowTimedTree, InitialCondition) {
  Rng rng(3);
  const TimedTree tt = grow_timed_tree({0.0, 1}, rng);
  EXPECT_EQ(tt.birth_time, (std::vector<double>{0.0, 0.0}));
}

TEST(GrowTimedTree, SameJumpChainAsUntimed) {
  Rng a(11), b(11);
  EXPECT_EQ(grow_timed_tree({0.5, 300}, a).tree, grow_tree({0.5, 300}, b));
}

TEST(GrowTimedTree, FirstHoldingTimeMean) {
  constexpr int kRuns = 100'000;
  double sum = 0.0;
  for (int s = 0; s < kRuns; ++s) {
    Rng rng(s, 5);
    sum += grow_timed_tree({0.0, 2}, rng).birth_time[2];
  }
  EXPECT_NEAR(sum / kRuns, 0.5, 0.01);
}

TEST(GrowTimedTree, SizeAtCountsArrivals) {
  Rng rng(2);
  const TimedTree tt = grow_timed_tree({0.0, 50}, rng);
  EXPECT_EQ(tt.size_at(0.0), 2u);
  EXPECT_EQ(tt.size_at(1e9), 51u);
  for (Vertex j = 2; j <= 50; ++j) {
    EXPECT_EQ(tt.size_at(tt.birth_time[j]), j + 1);
    ASSERT_GE(tt.birth_time[j], tt.birth_time[j - 1]);
  }
}

TEST(GrowTimedTreeUntil, StopsAtHorizon) {
  Rng rng(5);
  const TimedTree tt = grow_timed_tree_until(0.0, 2.0, 1'000'000, rng);
  EXPECT_LE(tt.birth_time.back(), 2.0);
  Rng small(5);
  EXPECT_THROW(grow_timed_tree_until(0.0, 50.0, 1000, small), std::runtime_error);
}

TEST(YuleValue, Examples) {
  EXPECT_DOUBLE_EQ(yule_value(2, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(yule_value(2, 3.0), 8.0);
  EXPECT_DOUBLE_EQ(yule_value(5, 1.0), 13.0);
  EXPECT_THROW(yule_value(1, 0.0), std::domain_error);
}

TEST(YuleValue, EqualsTotalAttachmentWeight) {
  Rng rng(9);
  const double beta = 0.75;
  const Tree t = grow_tree({beta, 200}, rng);
  double weight = 0.0;
  for (Vertex i = 0; i < t.vertices(); ++i) weight += t.degree(i) + beta;
  EXPECT_NEAR(weight, yule_value(t.vertices(), beta), 1e-9);
}

TEST(TreeIo, RoundTrip) {
  Rng rng(4);
  const TimedTree tt = grow_timed_tree({0.0, 40}, rng);
  std::stringstream plain;
  write_tree(plain, tt.tree);
  EXPECT_EQ(read_tree(plain), tt.tree);

  std::stringstream timed;
  write_tree(timed, tt);
  std::string line;
  std::getline(timed, line);
  EXPECT_EQ(line, "0 0");
  for (Vertex j = 2; j <= 40; ++j) {
    Vertex parent;
    double t;
    timed >> parent >> t;
    EXPECT_EQ(parent, tt.tree.parent(j));
    EXPECT_EQ(t, tt.birth_time[j]);  // 17 digits round-trip exactly
  }
}

TEST(TreeIo, FiveVertexFileHasFiveLines) {
  Rng rng(1);
  std::stringstream out;
  write_tree(out, grow_tree({0.0, 5}, rng));
  const std::string s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
}
