#pragma once

// Length-based sentence alignment in the Gale-Church style, with an optional
// bilingual dictionary for a coverage term on single pairs.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bitext_sieve/core.hpp"
#include "bitext_sieve/parallel.hpp"

namespace sieve {

enum class BeadType { one_one, one_zero, zero_one, two_one, one_two, two_two };

inline constexpr std::array<BeadType, 6> kBeadTypes{BeadType::one_one, BeadType::one_zero, BeadType::zero_one,
                                                    BeadType::two_one, BeadType::one_two,  BeadType::two_two};

struct BeadShape {
  int source;
  int target;
};

inline constexpr BeadShape shape(BeadType b) {
  constexpr std::array<BeadShape, 6> shapes{{{1, 1}, {1, 0}, {0, 1}, {2, 1}, {1, 2}, {2, 2}}};
  return shapes[static_cast<std::size_t>(b)];
}

inline const char* to_string(BeadType b) {
  constexpr std::array<const char*, 6> names{"1-1", "1-0", "0-1", "2-1", "1-2", "2-2"};
  return names[static_cast<std::size_t>(b)];
}

using Dictionary = std::unordered_map<std::string, std::unordered_set<std::string>>;

struct AlignmentParams {
  double c = 1.0;
  double s2 = 6.8;
  // -ln of the bead priors 0.89, 0.0099/2, 0.0099/2, 0.089/2, 0.089/2, 0.011.
  std::array<double, 6> penalty{-std::log(0.89),      -std::log(0.0099 / 2), -std::log(0.0099 / 2),
                                -std::log(0.089 / 2), -std::log(0.089 / 2),  -std::log(0.011)};
  double coverage_weight = 1.0;
  const Dictionary* dictionary = nullptr;
  Scheme source_scheme = Scheme::whitespace;
  Scheme target_scheme = Scheme::whitespace;

  double bead_penalty(BeadType b) const { return penalty[static_cast<std::size_t>(b)]; }

  void validate() const {
    if (!(c > 0.0) || !(s2 > 0.0) || !std::isfinite(c) || !std::isfinite(s2)) {
      throw ConfigError("alignment c and s2 must be positive and finite");
    }
    for (double p : penalty) {
      if (!std::isfinite(p)) throw ConfigError("bead penalties must be finite");
      if (p < bead_penalty(BeadType::one_one)) throw ConfigError("the 1-1 bead must have the smallest penalty");
    }
  }
};

// Returned for a pair with two empty sides.
inline constexpr double kEmptyPairScore = -1e6;

// ln erfc(x) for x >= 0, using the asymptotic series once erfc underflows.
inline double log_erfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  const double x2 = x * x;
  return -x2 - std::log(x * std::sqrt(std::numbers::pi)) + std::log1p(-0.5 / x2 + 0.75 / (x2 * x2));
}

// Symmetric Gale-Church statistic for lengths (ls, lt); 0 when both are 0.
inline double length_delta(double ls, double lt, double c, double s2) {
  if (ls == 0.0 && lt == 0.0) return 0.0;
  return (lt - c * ls) / std::sqrt(s2 * (ls + lt / c) / 2.0);
}

// ln P(|delta| >= observed) under a standard normal: the two-sided match
// probability, at most 0.
inline double length_log_match(double ls, double lt, double c, double s2) {
  return log_erfc(std::abs(length_delta(ls, lt, c, s2)) / std::numbers::sqrt2);
}

// Fraction of source tokens with at least one dictionary translation among
// the target tokens. 0 for an empty source.
inline double dictionary_coverage(const TokenSeq& source, const TokenSeq& target, const Dictionary& dict) {
  if (source.empty()) return 0.0;
  const std::unordered_set<std::string> present(target.tokens.begin(), target.tokens.end());
  std::size_t covered = 0;
  for (const auto& w : source.tokens) {
    auto it = dict.find(w);
    if (it == dict.end()) continue;
    for (const auto& t : it->second) {
      if (present.count(t)) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(source.size());
}

// Higher is better. Lengths are counted in non-whitespace characters.
inline double pair_alignment_score(const SentencePair& pair, const AlignmentParams& params) {
  const auto ls = static_cast<double>(char_length(pair.source));
  const auto lt = static_cast<double>(char_length(pair.target));
  if (ls == 0.0 && lt == 0.0) return kEmptyPairScore;
  double score = length_log_match(ls, lt, params.c, params.s2);
  if (params.dictionary) {
    const double cov = dictionary_coverage(tokenize(pair.source, params.source_scheme),
                                           tokenize(pair.target, params.target_scheme), *params.dictionary);
    score -= params.coverage_weight * (1.0 - cov);
  }
  return score;
}

inline std::vector<double> alignment_scores(std::span<const SentencePair> pairs, const AlignmentParams& params,
                                            std::size_t workers = 1) {
  params.validate();
  std::vector<double> out(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) { out[i] = pair_alignment_score(pairs[i], params); });
  return out;
}

struct Bead {
  BeadType type;
  std::size_t source_begin;
  std::size_t target_begin;

  friend bool operator==(const Bead&, const Bead&) = default;
};

struct DocAlignment {
  std::vector<Bead> beads;
  double cost = 0.0;
};

// Cost of one bead: its penalty minus the log length match of the joined spans.
inline double bead_cost(BeadType b, std::span<const std::size_t> src_len, std::span<const std::size_t> tgt_len,
                        std::size_t i, std::size_t j, const AlignmentParams& params) {
  const auto [ns, nt] = shape(b);
  double ls = 0.0, lt = 0.0;
  for (int k = 0; k < ns; ++k) ls += static_cast<double>(src_len[i + static_cast<std::size_t>(k)]);
  for (int k = 0; k < nt; ++k) lt += static_cast<double>(tgt_len[j + static_cast<std::size_t>(k)]);
  return params.bead_penalty(b) - length_log_match(ls, lt, params.c, params.s2);
}

// Minimum-cost monotone bead sequence. Among equal-cost predecessors the
// earlier bead type in kBeadTypes wins, so 1-1 beads are preferred.
inline DocAlignment align_doc(std::span<const std::string> src, std::span<const std::string> tgt,
                              const AlignmentParams& params) {
  params.validate();
  const std::size_t S = src.size(), T = tgt.size();
  std::vector<std::size_t> ls(S), lt(T);
  for (std::size_t i = 0; i < S; ++i) ls[i] = char_length(src[i]);
  for (std::size_t j = 0; j < T; ++j) lt[j] = char_length(tgt[j]);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost((S + 1) * (T + 1), kInf);
  std::vector<int> back((S + 1) * (T + 1), -1);
  auto at = [T](std::size_t i, std::size_t j) { return i * (T + 1) + j; };
  cost[at(0, 0)] = 0.0;
  for (std::size_t i = 0; i <= S; ++i) {
    for (std::size_t j = 0; j <= T; ++j) {
      if (i == 0 && j == 0) continue;
      for (std::size_t b = 0; b < kBeadTypes.size(); ++b) {
        const auto [ns, nt] = shape(kBeadTypes[b]);
        if (i < static_cast<std::size_t>(ns) || j < static_cast<std::size_t>(nt)) continue;
        const std::size_t pi = i - static_cast<std::size_t>(ns), pj = j - static_cast<std::size_t>(nt);
        if (cost[at(pi, pj)] == kInf) continue;
        const double c = cost[at(pi, pj)] + bead_cost(kBeadTypes[b], ls, lt, pi, pj, params);
        if (c < cost[at(i, j)]) {
          cost[at(i, j)] = c;
          back[at(i, j)] = static_cast<int>(b);
        }
      }
    }
  }
  DocAlignment out;
  out.cost = cost[at(S, T)];
  for (std::size_t i = S, j = T; i > 0 || j > 0;) {
    const BeadType b = kBeadTypes[static_cast<std::size_t>(back[at(i, j)])];
    i -= static_cast<std::size_t>(shape(b).source);
    j -= static_cast<std::size_t>(shape(b).target);
    out.beads.push_back({b, i, j});
  }
  std::reverse(out.beads.begin(), out.beads.end());
  return out;
}

// `src_token<TAB>tgt_token` per line; repeated sources accumulate.
inline Dictionary load_dictionary(const std::string& path) {
  Dictionary dict;
  std::uint64_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 'src_token<TAB>tgt_token'");
    }
    utf8::validate(line);
    dict[std::string(cols[0])].insert(std::string(cols[1]));
  }
  return dict;
}

}  // namespace sieve
