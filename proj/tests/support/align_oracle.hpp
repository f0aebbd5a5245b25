#pragma once

// Reference evaluators for alignment: the length statistic written out
// directly, and exhaustive enumeration of every monotone bead sequence.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace sieve::testing {

struct AlignOracle {
  double c = 1.0;
  double s2 = 6.8;
  // (source count, target count, penalty) per bead shape.
  std::vector<std::tuple<int, int, double>> beads{
      {1, 1, -std::log(0.89)},      {1, 0, -std::log(0.00495)}, {0, 1, -std::log(0.00495)},
      {2, 1, -std::log(0.0445)},    {1, 2, -std::log(0.0445)},  {2, 2, -std::log(0.011)}};

  double log_match(double ls, double lt) const {
    if (ls == 0 && lt == 0) return 0.0;
    const double mean = (ls + lt / c) / 2.0;
    const double delta = (lt - c * ls) / std::sqrt(s2 * mean);
    return std::log(std::erfc(std::fabs(delta) / std::sqrt(2.0)));
  }

  // Minimum total cost over all bead sequences, enumerated recursively.
  double brute_force_cost(const std::vector<double>& src, const std::vector<double>& tgt,
                          long* sequences = nullptr) const {
    double best = std::numeric_limits<double>::infinity();
    long count = 0;
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
      if (i == src.size() && j == tgt.size()) {
        ++count;
        if (acc < best) best = acc;
        return;
      }
      for (const auto& [ns, nt, pen] : beads) {
        if (i + static_cast<std::size_t>(ns) > src.size() || j + static_cast<std::size_t>(nt) > tgt.size()) continue;
        double ls = 0, lt = 0;
        for (int k = 0; k < ns; ++k) ls += src[i + static_cast<std::size_t>(k)];
        for (int k = 0; k < nt; ++k) lt += tgt[j + static_cast<std::size_t>(k)];
        walk(i + static_cast<std::size_t>(ns), j + static_cast<std::size_t>(nt), acc + pen - log_match(ls, lt));
      }
    };
    walk(0, 0, 0.0);
    if (sequences) *sequences = count;
    return best;
  }
};

}  // namespace sieve::testing
