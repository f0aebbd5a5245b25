#pragma once

// Balanced synthetic training data for the acceptability classifier: every
// positive pair is followed by one corrupted negative built by adjacent-target
// substitution, suffix truncation, or a partial word-order shuffle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitext_sieve/core.hpp"
#include "bitext_sieve/parallel.hpp"
#include "bitext_sieve/random.hpp"

namespace sieve {

enum class Corruption { none, adjacent, truncate, swap };

inline const char* to_string(Corruption c) {
  switch (c) {
    case Corruption::none: return "none";
    case Corruption::adjacent: return "adjacent";
    case Corruption::truncate: return "truncate";
    case Corruption::swap: return "swap";
  }
  return "?";
}

inline Corruption parse_corruption(std::string_view s) {
  for (auto c : {Corruption::none, Corruption::adjacent, Corruption::truncate, Corruption::swap}) {
    if (s == to_string(c)) return c;
  }
  throw DataError("unknown corruption tag '" + std::string(s) + "'");
}

struct FractionRange {
  double lo = 0.3;
  double hi = 0.7;
};

struct CorruptionPolicy {
  int window = 2;
  FractionRange truncate;
  FractionRange swap;
  std::uint64_t seed = 0;
  Scheme source_scheme = Scheme::whitespace;
  Scheme target_scheme = Scheme::whitespace;
  int swap_attempts = 16;

  Scheme scheme(Side s) const { return s == Side::source ? source_scheme : target_scheme; }

  void validate() const {
    if (window < 1) throw ConfigError("--k must be >= 1");
    for (const auto& r : {truncate, swap}) {
      if (!(r.lo > 0.0 && r.lo <= r.hi && r.hi < 1.0)) throw ConfigError("fraction ranges must lie within (0, 1)");
    }
  }
};

struct LabeledRecord {
  SentencePair pair;
  int label = 1;
  Corruption tag = Corruption::none;
  std::uint64_t origin = 0;  // ordinal of the record the negative target came from
};

using LabeledSet = std::vector<LabeledRecord>;

namespace synth_detail {

inline std::string join_tokens(const std::vector<std::string>& tokens, Scheme scheme) {
  return TokenSeq{tokens, scheme}.join();
}

inline std::size_t fraction_count(double f, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(f * static_cast<double>(n)));
}

}  // namespace synth_detail

// Pairs source i with a target drawn uniformly from the other records within
// `k` positions. Returns the pair and the ordinal of the chosen target.
inline std::pair<SentencePair, std::uint64_t> neg_adjacent(std::span<const SentencePair> corpus, std::size_t i, int k,
                                                           RecordRng& rng) {
  if (corpus.size() < 2) throw DataError("no adjacent candidates");
  const std::size_t lo = i >= static_cast<std::size_t>(k) ? i - static_cast<std::size_t>(k) : 0;
  const std::size_t hi = std::min(corpus.size() - 1, i + static_cast<std::size_t>(k));
  const auto span_len = static_cast<std::int64_t>(hi - lo);  // candidates, excluding i
  auto j = lo + static_cast<std::size_t>(rng.uniform_int(0, span_len - 1));
  if (j >= i) ++j;
  SentencePair out = corpus[i];
  out.target = corpus[j].target;
  return {out, j};
}

// Drops a suffix of ceil(f*n) tokens on one side, keeping at least one.
// Returns nothing when that side has fewer than 2 tokens.
inline std::optional<SentencePair> neg_truncate(const SentencePair& pair, Side side, FractionRange range, Scheme scheme,
                                                RecordRng& rng) {
  auto tokens = tokenize(pair.side(side), scheme).tokens;
  const std::size_t n = tokens.size();
  if (n < 2) return std::nullopt;
  const double f = rng.uniform_real(range.lo, range.hi);
  const std::size_t removed = std::min(synth_detail::fraction_count(f, n), n - 1);
  tokens.resize(n - removed);
  SentencePair out = pair;
  out.side(side) = synth_detail::join_tokens(tokens, scheme);
  return out;
}

// Permutes the tokens at ceil(f*n) randomly chosen positions. Positions and
// permutation are redrawn until the sequence changes; gives up after
// `attempts` draws (e.g. when every token is identical).
inline std::optional<SentencePair> neg_swap(const SentencePair& pair, Side side, FractionRange range, Scheme scheme,
                                            RecordRng& rng, int attempts = 16) {
  const auto tokens = tokenize(pair.side(side), scheme).tokens;
  const std::size_t n = tokens.size();
  if (n < 2) return std::nullopt;
  const double f = rng.uniform_real(range.lo, range.hi);
  const std::size_t m = std::clamp<std::size_t>(synth_detail::fraction_count(f, n), 2, n);
  std::vector<std::size_t> idx(n);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    for (std::size_t p = 0; p < n; ++p) idx[p] = p;
    for (std::size_t p = 0; p < m; ++p) {
      const auto q = p + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1 - p)));
      std::swap(idx[p], idx[q]);
    }
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<long>(m));
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::size_t> perm = chosen;
    for (std::size_t p = m - 1; p > 0; --p) {
      const auto q = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p)));
      std::swap(perm[p], perm[q]);
    }
    auto out_tokens = tokens;
    for (std::size_t p = 0; p < m; ++p) out_tokens[chosen[p]] = tokens[perm[p]];
    if (out_tokens != tokens) {
      SentencePair out = pair;
      out.side(side) = synth_detail::join_tokens(out_tokens, scheme);
      return out;
    }
  }
  return std::nullopt;
}

// One negative for record i. The drawn corruption is tried first; when it
// cannot produce a pair different from the positive, the remaining ones are
// tried in the order adjacent, truncate, swap.
inline LabeledRecord make_negative(std::span<const SentencePair> corpus, std::size_t i,
                                   const CorruptionPolicy& policy) {
  const SentencePair& pos = corpus[i];
  RecordRng rng(policy.seed, pos.id);
  const auto drawn = static_cast<Corruption>(1 + rng.uniform_int(0, 2));
  const Side side = rng.coin() ? Side::target : Side::source;

  auto attempt = [&](Corruption c) -> std::optional<LabeledRecord> {
    std::optional<SentencePair> neg;
    std::uint64_t origin = i;
    switch (c) {
      case Corruption::adjacent:
        if (corpus.size() >= 2) {
          auto [p, j] = neg_adjacent(corpus, i, policy.window, rng);
          neg = std::move(p);
          origin = j;
        }
        break;
      case Corruption::truncate:
        neg = neg_truncate(pos, side, policy.truncate, policy.scheme(side), rng);
        break;
      case Corruption::swap:
        neg = neg_swap(pos, side, policy.swap, policy.scheme(side), rng, policy.swap_attempts);
        break;
      case Corruption::none:
        break;
    }
    if (!neg || (neg->source == pos.source && neg->target == pos.target)) return std::nullopt;
    return LabeledRecord{std::move(*neg), 0, c, origin};
  };

  if (auto r = attempt(drawn)) return *r;
  for (auto c : {Corruption::adjacent, Corruption::truncate, Corruption::swap}) {
    if (c == drawn) continue;
    if (auto r = attempt(c)) return *r;
  }
  throw DataError("record " + std::to_string(pos.id) + ": no corruption yields a pair different from the positive");
}

// Positive/negative records interleaved in input order. Output does not
// depend on `workers`.
inline LabeledSet build_training_set(std::span<const SentencePair> positives, const CorruptionPolicy& policy,
                                     std::size_t workers = 1) {
  policy.validate();
  if (positives.size() < 2) throw DataError("need at least 2 positive pairs, got " + std::to_string(positives.size()));
  LabeledSet out(2 * positives.size());
  parallel_for(positives.size(), workers, [&](std::size_t i) {
    out[2 * i] = LabeledRecord{positives[i], 1, Corruption::none, static_cast<std::uint64_t>(i)};
    out[2 * i + 1] = make_negative(positives, i, policy);
  });
  return out;
}

// `source<TAB>target<TAB>label<TAB>tag` per record.
inline std::string format_labeled_set(const LabeledSet& set) {
  std::string out;
  for (const auto& r : set) {
    out += r.pair.source;
    out += '\t';
    out += r.pair.target;
    out += '\t';
    out += r.label ? '1' : '0';
    out += '\t';
    out += to_string(r.tag);
    out += '\n';
  }
  return out;
}

inline LabeledSet read_labeled_set(const std::string& path) {
  LabeledSet out;
  std::uint64_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    const auto cols = split_tabs(line);
    const std::string where = path + ":" + std::to_string(line_no + 1);
    if (cols.size() != 4) throw DataError(where + ": expected 4 columns (source, target, label, tag)");
    if (cols[2] != "0" && cols[2] != "1") throw DataError(where + ": label must be 0 or 1");
    utf8::validate(line);
    LabeledRecord r;
    r.pair = {line_no, std::string(cols[0]), std::string(cols[1]), std::nullopt};
    r.label = cols[2] == "1" ? 1 : 0;
    r.tag = parse_corruption(cols[3]);
    r.origin = line_no;
    out.push_back(std::move(r));
    ++line_no;
  }
  return out;
}

}  // namespace sieve
