#pragma once

// Sort-then-prefix reference for ranked selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <tuple>
#include <vector>

namespace sieve::testing {

struct RankedFixture {
  std::vector<double> scores;
  std::vector<std::uint64_t> ids;
  std::vector<std::uint64_t> words;
};

// Scores drawn from a small set of values so that ties are common.
inline RankedFixture random_ranked_fixture(std::mt19937_64& rng, std::size_t n) {
  RankedFixture f;
  std::uniform_int_distribution<int> level(0, 9);
  std::uniform_int_distribution<std::uint64_t> len(0, 12);
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i * 3 + 7;
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    f.scores.push_back(level(rng) / 10.0);
    f.ids.push_back(ids[i]);
    f.words.push_back(len(rng));
  }
  return f;
}

inline std::vector<std::size_t> oracle_order(const RankedFixture& f) {
  std::vector<std::tuple<double, std::uint64_t, std::size_t>> keyed;
  for (std::size_t i = 0; i < f.scores.size(); ++i) keyed.emplace_back(-f.scores[i], f.ids[i], i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (const auto& k : keyed) out.push_back(std::get<2>(k));
  return out;
}

// Shortest ranked prefix whose word total reaches the budget (or everything).
inline std::vector<std::size_t> oracle_budget(const RankedFixture& f, std::uint64_t budget) {
  const auto order = oracle_order(f);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::uint64_t prefix = 0;
    for (std::size_t m = 0; m < k; ++m) prefix += f.words[order[m]];
    if (prefix >= budget) break;
    out.push_back(order[k]);
  }
  return out;
}

inline std::vector<std::size_t> oracle_top_percent(const RankedFixture& f, double percent) {
  const auto order = oracle_order(f);
  std::size_t keep = 0;
  while (keep < order.size() && static_cast<double>(keep) * 100.0 < percent * static_cast<double>(order.size())) {
    ++keep;
  }
  return {order.begin(), order.begin() + static_cast<long>(keep)};
}

}  // namespace sieve::testing
