#pragma once

// Precision/recall of a score column against binary labels, ROC AUC, and a
// corpus summary over scored records.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bitext_sieve/core.hpp"
#include "bitext_sieve/selection.hpp"

namespace sieve {

struct PRPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::uint64_t predicted = 0;
  std::uint64_t true_positive = 0;
};

namespace eval_detail {

inline std::uint64_t check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                    std::to_string(labels.size()) + ")");
  }
  std::uint64_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("labels must be 0 or 1");
    positives += static_cast<std::uint64_t>(l);
  }
  if (positives == 0) throw DataError("labels contain no positive example");
  return positives;
}

}  // namespace eval_detail

// A record is predicted positive iff score >= threshold. Precision is 1 when
// nothing is predicted.
inline PRPoint precision_recall_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  const auto positives = eval_detail::check_labels(scores, labels);
  PRPoint p;
  p.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= threshold) {
      ++p.predicted;
      p.true_positive += static_cast<std::uint64_t>(labels[i]);
    }
  }
  p.precision = p.predicted ? static_cast<double>(p.true_positive) / static_cast<double>(p.predicted) : 1.0;
  p.recall = static_cast<double>(p.true_positive) / static_cast<double>(positives);
  return p;
}

inline std::vector<PRPoint> pr_curve(std::span<const double> scores, std::span<const int> labels,
                                     std::span<const double> grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("threshold grid must be sorted ascending");
  eval_detail::check_labels(scores, labels);
  std::vector<PRPoint> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(precision_recall_at(scores, labels, t));
  return out;
}

// "start:end:step", inclusive of end up to rounding.
inline std::vector<double> parse_grid(std::string_view text) {
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  if (b == std::string_view::npos) throw ConfigError("--grid must look like start:end:step");
  const double start = parse_double(text.substr(0, a), "--grid start");
  const double end = parse_double(text.substr(a + 1, b - a - 1), "--grid end");
  const double step = parse_double(text.substr(b + 1), "--grid step");
  if (!(step > 0.0) || end < start) throw ConfigError("--grid needs step > 0 and end >= start");
  const auto n = static_cast<std::size_t>(std::floor((end - start) / step + 1e-9)) + 1;
  if (n > 1000000) throw ConfigError("--grid has too many points");
  std::vector<double> grid;
  for (std::size_t i = 0; i < n; ++i) grid.push_back(std::min(end, start + static_cast<double>(i) * step));
  return grid;
}

// Probability that a random positive outscores a random negative (ties 1/2).
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto positives = eval_detail::check_labels(scores, labels);
  const std::uint64_t negatives = labels.size() - positives;
  if (negatives == 0) throw DataError("labels contain no negative example");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

inline constexpr std::size_t kHistogramBins = 32;

struct CorpusReport {
  std::uint64_t records = 0;
  std::array<std::array<std::uint64_t, kHistogramBins>, 4> histograms{};  // language, accept, domain, final
  std::array<std::uint64_t, 3> zeroed{};                                   // language, accept, domain
  std::uint64_t total_words = 0;
  std::uint64_t selected_words = 0;

  double zeroed_fraction(std::size_t filter) const {
    return records ? static_cast<double>(zeroed[filter]) / static_cast<double>(records) : 0.0;
  }

  nlohmann::ordered_json to_json() const {
    static const std::array<const char*, 4> names{"language", "acceptability", "domain", "final"};
    nlohmann::ordered_json j;
    j["records"] = records;
    j["total_words"] = total_words;
    j["selected_words"] = selected_words;
    nlohmann::ordered_json z, h;
    for (std::size_t f = 0; f < 3; ++f) z[names[f]] = zeroed_fraction(f);
    for (std::size_t f = 0; f < 4; ++f) h[names[f]] = histograms[f];
    j["zeroed_fraction"] = z;
    j["histograms"] = h;
    return j;
  }
};

inline std::size_t histogram_bin(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return kHistogramBins - 1;
  return std::min(kHistogramBins - 1, static_cast<std::size_t>(v * kHistogramBins));
}

// Histograms are over [0, 1]; the domain column is min-max normalized first.
inline CorpusReport corpus_stats(std::span<const ScoreVector> scores, std::span<const std::uint64_t> words,
                                 std::uint64_t selected_words = 0) {
  CorpusReport r;
  r.records = scores.size();
  r.selected_words = selected_words;
  for (auto w : words) r.total_words += w;
  MinMax domain;
  for (const auto& s : scores) domain.add(s.domain);
  for (const auto& s : scores) {
    const std::array<double, 4> v{s.language, s.acceptability, domain.normalize(s.domain), s.final};
    for (std::size_t f = 0; f < 4; ++f) ++r.histograms[f][histogram_bin(v[f])];
    r.zeroed[0] += s.language == 0.0;
    r.zeroed[1] += s.acceptability == 0.0;
    r.zeroed[2] += s.domain == 0.0;
  }
  return r;
}

}  // namespace sieve
