#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "bitext_sieve/selection.hpp"
#include "support/selection_oracle.hpp"

namespace sieve {
namespace {

std::vector<std::uint64_t> iota_ids(std::size_t n) {
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

TEST(MinmaxNormalize, Examples) {
  EXPECT_EQ(minmax_normalize(std::vector<double>{2, 4, 6}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(minmax_normalize(std::vector<double>{5, 5, 5}), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(minmax_normalize(std::vector<double>{3.7}), (std::vector<double>{1.0}));
  EXPECT_THROW(minmax_normalize(std::vector<double>{}), DataError);
}

TEST(MinmaxNormalize, IdempotentOnUnitRange) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v{0.0, 1.0};
    for (int i = 0; i < 20; ++i) v.push_back(u(rng));
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(minmax_normalize(v), v);
  }
}

TEST(MinmaxNormalize, PreservesOrderAndRange) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 80.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(u(rng));
    const auto n = minmax_normalize(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_GE(n[i], 0.0);
      EXPECT_LE(n[i], 1.0);
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[i] <= v[j]) {
          EXPECT_LE(n[i], n[j]);
        }
      }
    }
  }
}

TEST(MinMax, MergeEqualsSerial) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = u(rng);
  MinMax all, a, b;
  for (std::size_t i = 0; i < v.size(); ++i) {
    all.add(v[i]);
    (i < 400 ? a : b).add(v[i]);
  }
  a.merge(b);
  EXPECT_EQ(a.min, all.min);
  EXPECT_EQ(a.max, all.max);
  EXPECT_EQ(a.count, all.count);
}

TEST(Combine, Examples) {
  EXPECT_NEAR(combine(1.0, 0.8, 0.5), 0.4, 1e-15);
  EXPECT_EQ(combine(0.0, 0.9, 0.7), 0.0);
  EXPECT_EQ(combine(1.0, 1.0, 1.0), 1.0);
  EXPECT_EQ(combine(ScoreVector{1.0, 0.5, 0.5, 0.0}), 0.25);
}

TEST(Combine, MonotoneInEachPartial) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double l = rng() % 2, a = u(rng), d = u(rng), bump = u(rng);
    const double base = combine(l, a, d);
    EXPECT_LE(base, combine(l, std::min(1.0, a + bump), d));
    EXPECT_LE(base, combine(l, a, std::min(1.0, d + bump)));
    EXPECT_LE(base, combine(1.0, a, d));
  }
}

TEST(SelectByBudget, Examples) {
  const std::vector<double> scores{0.9, 0.8, 0.1};
  const std::vector<std::uint64_t> words{5, 5, 5};
  const auto ids = iota_ids(3);
  EXPECT_EQ(select_by_budget(scores, ids, words, 10).indices, (std::vector<std::size_t>{0, 1}));
  const auto crossing = select_by_budget(scores, ids, words, 11);
  EXPECT_EQ(crossing.indices, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(crossing.words, 15u);
  EXPECT_FALSE(crossing.budget_exceeds_corpus);
  EXPECT_TRUE(select_by_budget(scores, ids, words, 16).budget_exceeds_corpus);
  const std::vector<double> tied{0.5, 0.5};
  const std::vector<std::uint64_t> reversed_ids{9, 4};
  EXPECT_EQ(select_by_budget(tied, reversed_ids, std::vector<std::uint64_t>{1, 1}, 1).indices,
            (std::vector<std::size_t>{1}));
  EXPECT_THROW(select_by_budget(scores, ids, words, 0), ConfigError);
}

TEST(SelectTopPercent, Examples) {
  const std::vector<double> four{0.1, 0.4, 0.3, 0.2};
  EXPECT_EQ(select_top_percent(four, iota_ids(4), 100).indices.size(), 4u);
  EXPECT_EQ(select_top_percent(four, iota_ids(4), 50).indices, (std::vector<std::size_t>{1, 2}));
  const std::vector<double> five{0.1, 0.4, 0.3, 0.2, 0.0};
  EXPECT_EQ(select_top_percent(five, iota_ids(5), 50).indices, (std::vector<std::size_t>{1, 2, 3}));
  for (double bad : {0.0, -1.0, 100.5, 150.0}) {
    try {
      select_top_percent(four, iota_ids(4), bad);
      FAIL() << bad;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("--top-percent"), std::string::npos);
    }
  }
}

TEST(Selection, MatchesSortThenPrefixOracle) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testing::random_ranked_fixture(rng, 100);
    std::uint64_t total = 0;
    for (auto w : f.words) total += w;
    for (std::uint64_t budget : {std::uint64_t{1}, total / 3, total / 2, total, total + 5}) {
      if (budget == 0) continue;
      EXPECT_EQ(select_by_budget(f.scores, f.ids, f.words, budget).indices, testing::oracle_budget(f, budget));
    }
    for (double pct : {1.0, 33.3, 50.0, 75.0, 99.5, 100.0}) {
      EXPECT_EQ(select_top_percent(f.scores, f.ids, pct).indices, testing::oracle_top_percent(f, pct));
    }
  }
}

TEST(Selection, RankedPrefixMaximizesScoreForItsSize) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testing::random_ranked_fixture(rng, 100);
    const auto sel = select_by_budget(f.scores, f.ids, f.words, 200);
    double chosen = 0.0;
    for (auto i : sel.indices) chosen += f.scores[i];
    auto sorted = f.scores;
    std::sort(sorted.rbegin(), sorted.rend());
    double best = 0.0;
    for (std::size_t k = 0; k < sel.indices.size(); ++k) best += sorted[k];
    EXPECT_EQ(chosen, best);
  }
}

}  // namespace
}  // namespace sieve
