#pragma once

// Score normalization, product composition and ranked subset selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bitext_sieve/core.hpp"

namespace sieve {

// Running min/max over finite values; mergeable across shards.
struct MinMax {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::uint64_t count = 0;

  void add(double v) {
    if (!std::isfinite(v)) return;
    min = std::min(min, v);
    max = std::max(max, v);
    ++count;
  }
  void merge(const MinMax& o) {
    min = std::min(min, o.min);
    max = std::max(max, o.max);
    count += o.count;
  }
  bool empty() const { return count == 0; }

  // A constant column carries no information and maps to 1.
  double normalize(double v) const {
    if (max == min) return 1.0;
    return (v - min) / (max - min);
  }
};

inline std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot normalize an empty score list");
  MinMax mm;
  for (double v : values) mm.add(v);
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(mm.normalize(v));
  return out;
}

inline double combine(double language, double acceptability, double domain_normalized) {
  return language * acceptability * domain_normalized;
}

inline double combine(const ScoreVector& s) { return combine(s.language, s.acceptability, s.domain); }

// Indices ordered by score descending, then id ascending.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores, std::span<const std::uint64_t> ids) {
  if (ids.size() != scores.size()) throw ConfigError("scores and ids differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  return order;
}

struct Selection {
  std::vector<std::size_t> indices;  // in rank order
  std::uint64_t words = 0;
  bool budget_exceeds_corpus = false;
};

// Takes ranked records until the word budget is reached; the record that
// crosses the budget is included.
inline Selection select_by_budget(std::span<const double> scores, std::span<const std::uint64_t> ids,
                                  std::span<const std::uint64_t> word_counts, std::uint64_t budget) {
  if (budget == 0) throw ConfigError("--budget-words must be > 0");
  if (word_counts.size() != scores.size()) throw ConfigError("scores and word counts differ in length");
  Selection sel;
  for (std::size_t i : rank_by_score(scores, ids)) {
    if (sel.words >= budget) break;
    sel.indices.push_back(i);
    sel.words += word_counts[i];
  }
  sel.budget_exceeds_corpus = sel.words < budget;
  return sel;
}

// ceil(percent/100 * n) highest-ranked records.
inline Selection select_top_percent(std::span<const double> scores, std::span<const std::uint64_t> ids,
                                    double percent) {
  if (!(percent > 0.0 && percent <= 100.0)) {
    throw ConfigError("--top-percent must be in (0, 100], got " + format_score(percent));
  }
  const auto n = static_cast<double>(scores.size());
  const auto keep = static_cast<std::size_t>(std::ceil(percent * n / 100.0));
  Selection sel;
  sel.indices = rank_by_score(scores, ids);
  sel.indices.resize(std::min(keep, sel.indices.size()));
  return sel;
}

}  // namespace sieve
