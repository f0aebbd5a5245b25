#pragma once

// Translation acceptability: the probability that a pair is a mutual
// translation. A built-in logistic model over lexical features stands in for
// a neural classifier; external models are reached through the scorer
// protocol. Also hosts the unsupervised positive mining step.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bitext_sieve/core.hpp"
#include "bitext_sieve/parallel.hpp"
#include "bitext_sieve/scorer_protocol.hpp"
#include "bitext_sieve/selection.hpp"
#include "bitext_sieve/synth.hpp"

namespace sieve {

// P(target token | source token), rows sorted for stable serialization.
using Lexicon = std::map<std::string, std::map<std::string, double>>;

inline std::vector<std::string> lexical_tokens(std::string_view text, Scheme scheme) {
  auto toks = tokenize(text, scheme).tokens;
  for (auto& t : toks) {
    for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return toks;
}

// IBM Model 1 without a null word. Iteration 0 is the uniform distribution
// over co-occurring target types.
inline Lexicon learn_lexicon(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& corpus,
                             int iterations) {
  if (corpus.size() < 10) throw DataError("lexicon learning needs at least 10 pairs, got " + std::to_string(corpus.size()));
  if (iterations < 0) throw ConfigError("lexicon iterations must be >= 0");

  std::unordered_map<std::string, std::uint32_t> src_ids, tgt_ids;
  std::vector<std::string> src_words, tgt_words;
  auto intern = [](auto& ids, auto& words, const std::string& w) {
    auto [it, fresh] = ids.emplace(w, static_cast<std::uint32_t>(words.size()));
    if (fresh) words.push_back(w);
    return it->second;
  };
  std::vector<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>> sents;
  sents.reserve(corpus.size());
  for (const auto& [s, t] : corpus) {
    std::vector<std::uint32_t> si, ti;
    for (const auto& w : s) si.push_back(intern(src_ids, src_words, w));
    for (const auto& w : t) ti.push_back(intern(tgt_ids, tgt_words, w));
    sents.emplace_back(std::move(si), std::move(ti));
  }

  auto key = [](std::uint32_t s, std::uint32_t t) { return (static_cast<std::uint64_t>(s) << 32) | t; };
  std::unordered_map<std::uint64_t, double> prob;
  {
    std::vector<std::set<std::uint32_t>> cooc(src_words.size());
    for (const auto& [si, ti] : sents) {
      for (auto s : si) cooc[s].insert(ti.begin(), ti.end());
    }
    for (std::uint32_t s = 0; s < cooc.size(); ++s) {
      for (auto t : cooc[s]) prob[key(s, t)] = 1.0 / static_cast<double>(cooc[s].size());
    }
  }

  for (int it = 0; it < iterations; ++it) {
    std::unordered_map<std::uint64_t, double> counts;
    std::vector<double> totals(src_words.size(), 0.0);
    for (const auto& [si, ti] : sents) {
      if (si.empty()) continue;
      for (auto t : ti) {
        double z = 0.0;
        for (auto s : si) z += prob[key(s, t)];
        for (auto s : si) {
          const double c = prob[key(s, t)] / z;
          counts[key(s, t)] += c;
          totals[s] += c;
        }
      }
    }
    for (auto& [k, p] : prob) {
      const auto s = static_cast<std::uint32_t>(k >> 32);
      auto c = counts.find(k);
      p = totals[s] > 0.0 && c != counts.end() ? c->second / totals[s] : 0.0;
    }
  }

  Lexicon lex;
  for (const auto& [k, p] : prob) {
    if (p <= 0.0) continue;
    lex[src_words[k >> 32]][tgt_words[k & 0xffffffffu]] = p;
  }
  return lex;
}

// Drops entries below `min_prob` (rows are not renormalized).
inline Lexicon prune_lexicon(const Lexicon& lex, double min_prob) {
  Lexicon out;
  for (const auto& [s, row] : lex) {
    for (const auto& [t, p] : row) {
      if (p >= min_prob) out[s][t] = p;
    }
  }
  return out;
}

inline constexpr std::size_t kFeatureCount = 8;

inline const std::array<const char*, kFeatureCount>& feature_names() {
  static const std::array<const char*, kFeatureCount> names{
      "length_ratio", "log_length_ratio", "abs_log_length_ratio", "forward_coverage",
      "backward_coverage", "literal_overlap", "copy_ratio", "order_agreement"};
  return names;
}

using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureConfig {
  double coverage_threshold = 0.1;
  Scheme source_scheme = Scheme::whitespace;
  Scheme target_scheme = Scheme::whitespace;
};

namespace accept_detail {

// Numbers, URLs and e-mail addresses found in whitespace tokens.
inline std::set<std::string> literals(std::string_view text) {
  std::set<std::string> out;
  for (const auto& tok : tokenize(text, Scheme::whitespace).tokens) {
    const bool url = tok.rfind("http://", 0) == 0 || tok.rfind("https://", 0) == 0 || tok.rfind("www.", 0) == 0;
    const auto at = tok.find('@');
    const bool email = at != std::string::npos && at > 0 && tok.find('.', at) != std::string::npos;
    if (url || email) {
      out.insert(tok);
      continue;
    }
    std::string num;
    for (std::size_t i = 0; i <= tok.size(); ++i) {
      const char ch = i < tok.size() ? tok[i] : ' ';
      if (std::isdigit(static_cast<unsigned char>(ch))) {
        num.push_back(ch);
      } else if ((ch == '.' || ch == ',') && !num.empty() && i + 1 < tok.size() &&
                 std::isdigit(static_cast<unsigned char>(tok[i + 1]))) {
        num.push_back('.');  // 3,5 and 3.5 compare equal
      } else if (!num.empty()) {
        out.insert("#" + num);
        num.clear();
      }
    }
  }
  return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// Longest common substring over code points divided by the longer side.
inline double copy_ratio(std::string_view s, std::string_view t) {
  const auto a = utf8::codepoints(s);
  const auto b = utf8::codepoints(t);
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  std::vector<std::uint32_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::uint32_t best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(best) / static_cast<double>(longest);
}

inline bool translated(const Lexicon& lex, const std::string& from, const std::unordered_set<std::string>& to,
                       double threshold) {
  auto row = lex.find(from);
  if (row == lex.end()) return false;
  for (const auto& [w, p] : row->second) {
    if (p >= threshold && to.count(w)) return true;
  }
  return false;
}

inline double coverage(const std::vector<std::string>& from, const std::vector<std::string>& to, const Lexicon& lex,
                       double threshold) {
  if (from.empty()) return 0.0;
  const std::unordered_set<std::string> present(to.begin(), to.end());
  std::size_t hit = 0;
  for (const auto& w : from) hit += translated(lex, w, present, threshold);
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

// Fraction of concordant pairs among translation links (union of both
// directions). 0.5 when fewer than two comparable links exist.
inline double order_agreement(const std::vector<std::string>& s, const std::vector<std::string>& t,
                              const Lexicon& fwd, const Lexicon& bwd, double threshold) {
  std::set<std::pair<std::size_t, std::size_t>> links;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      auto linked = [&](const Lexicon& lex, const std::string& a, const std::string& b) {
        auto row = lex.find(a);
        if (row == lex.end()) return false;
        auto cell = row->second.find(b);
        return cell != row->second.end() && cell->second >= threshold;
      };
      if (linked(fwd, s[i], t[j]) || linked(bwd, t[j], s[i])) links.emplace(i, j);
    }
  }
  const std::vector<std::pair<std::size_t, std::size_t>> v(links.begin(), links.end());
  std::size_t concordant = 0, comparable = 0;
  for (std::size_t a = 0; a < v.size(); ++a) {
    for (std::size_t b = a + 1; b < v.size(); ++b) {
      if (v[a].first == v[b].first || v[a].second == v[b].second) continue;
      ++comparable;
      concordant += (v[a].first < v[b].first) == (v[a].second < v[b].second);
    }
  }
  return comparable == 0 ? 0.5 : static_cast<double>(concordant) / static_cast<double>(comparable);
}

}  // namespace accept_detail

// `forward` maps source to target tokens, `backward` target to source.
inline FeatureVector extract_features(const SentencePair& pair, const Lexicon& forward, const Lexicon& backward,
                                      const FeatureConfig& cfg) {
  const auto s = lexical_tokens(pair.source, cfg.source_scheme);
  const auto t = lexical_tokens(pair.target, cfg.target_scheme);
  const double ls = static_cast<double>(s.size()), lt = static_cast<double>(t.size());
  const double ratio = lt == 0.0 ? 10.0 : std::clamp(ls / lt, 0.1, 10.0);
  FeatureVector f{};
  f[0] = ratio;
  f[1] = std::log(ratio);
  f[2] = std::abs(f[1]);
  f[3] = accept_detail::coverage(s, t, forward, cfg.coverage_threshold);
  f[4] = accept_detail::coverage(t, s, backward, cfg.coverage_threshold);
  f[5] = accept_detail::jaccard(accept_detail::literals(pair.source), accept_detail::literals(pair.target));
  f[6] = accept_detail::copy_ratio(pair.source, pair.target);
  f[7] = accept_detail::order_agreement(s, t, forward, backward, cfg.coverage_threshold);
  return f;
}

struct AcceptTrainConfig {
  int epochs = 30;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  int lexicon_iterations = 5;
  double lexicon_min_prob = 1e-3;
  FeatureConfig features;
};

class BuiltinAcceptability {
 public:
  static constexpr int kFormatVersion = 1;

  double probability(const FeatureVector& f) const {
    double z = bias_;
    for (std::size_t k = 0; k < kFeatureCount; ++k) z += weights_[k] * (f[k] - mean_[k]) / scale_[k];
    // Kept strictly inside (0, 1).
    return std::clamp(1.0 / (1.0 + std::exp(-z)), 1e-12, 1.0 - 1e-12);
  }

  FeatureVector features(const SentencePair& pair) const {
    return extract_features(pair, forward_, backward_, feature_cfg_);
  }

  // 0 when either side is empty.
  double score(const SentencePair& pair) const {
    if (char_length(pair.source) == 0 || char_length(pair.target) == 0) return 0.0;
    return probability(features(pair));
  }

  const std::array<double, kFeatureCount>& weights() const { return weights_; }
  double bias() const { return bias_; }
  const Lexicon& forward() const { return forward_; }
  const Lexicon& backward() const { return backward_; }
  const FeatureConfig& feature_config() const { return feature_cfg_; }

  // Logistic regression by seeded SGD on standardized features. Lexicons are
  // learned from the positive records. An unbalanced set is reweighted per
  // class and reported through `warnings`.
  static BuiltinAcceptability train(const LabeledSet& labeled, const AcceptTrainConfig& cfg,
                                    std::vector<std::string>* warnings = nullptr, std::size_t workers = 1) {
    if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0) {
      throw ConfigError("epochs and learning rate must be positive");
    }
    std::size_t pos = 0;
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> fwd_corpus, bwd_corpus;
    for (const auto& r : labeled) {
      if (r.label != 1) continue;
      ++pos;
      auto s = lexical_tokens(r.pair.source, cfg.features.source_scheme);
      auto t = lexical_tokens(r.pair.target, cfg.features.target_scheme);
      bwd_corpus.emplace_back(t, s);
      fwd_corpus.emplace_back(std::move(s), std::move(t));
    }
    const std::size_t neg = labeled.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("training set needs both positive and negative records");
    if (pos != neg && warnings) {
      warnings->push_back("unbalanced training set (" + std::to_string(pos) + " positive, " + std::to_string(neg) +
                          " negative); reweighting classes");
    }

    BuiltinAcceptability m;
    m.feature_cfg_ = cfg.features;
    m.forward_ = prune_lexicon(learn_lexicon(fwd_corpus, cfg.lexicon_iterations), cfg.lexicon_min_prob);
    m.backward_ = prune_lexicon(learn_lexicon(bwd_corpus, cfg.lexicon_iterations), cfg.lexicon_min_prob);

    std::vector<FeatureVector> x(labeled.size());
    parallel_for(labeled.size(), workers, [&](std::size_t i) { x[i] = m.features(labeled[i].pair); });

    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      double sum = 0.0, sq = 0.0;
      for (const auto& f : x) sum += f[k];
      const double mean = sum / static_cast<double>(x.size());
      for (const auto& f : x) sq += (f[k] - mean) * (f[k] - mean);
      const double sd = std::sqrt(sq / static_cast<double>(x.size()));
      m.mean_[k] = mean;
      m.scale_[k] = sd > 1e-12 ? sd : 1.0;
    }

    const double n = static_cast<double>(labeled.size());
    const double w_pos = n / (2.0 * static_cast<double>(pos));
    const double w_neg = n / (2.0 * static_cast<double>(neg));
    std::vector<std::size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      const double lr = cfg.learning_rate / (1.0 + 0.1 * epoch);
      for (const std::size_t i : order) {
        const int y = labeled[i].label;
        const double g = (m.probability(x[i]) - y) * (y ? w_pos : w_neg);
        for (std::size_t k = 0; k < kFeatureCount; ++k) {
          const double z = (x[i][k] - m.mean_[k]) / m.scale_[k];
          m.weights_[k] -= lr * (g * z + cfg.l2 * m.weights_[k]);
        }
        m.bias_ -= lr * g;
      }
    }
    return m;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = kFormatVersion;
    j["kind"] = "builtin";
    j["features"] = feature_names();
    j["mean"] = mean_;
    j["scale"] = scale_;
    j["weights"] = weights_;
    j["bias"] = bias_;
    j["coverage_threshold"] = feature_cfg_.coverage_threshold;
    j["source_scheme"] = to_string(feature_cfg_.source_scheme);
    j["target_scheme"] = to_string(feature_cfg_.target_scheme);
    j["forward"] = forward_;
    j["backward"] = backward_;
    return j;
  }

  static BuiltinAcceptability from_json(const nlohmann::json& j) {
    BuiltinAcceptability m;
    try {
      if (j.at("version").get<int>() != kFormatVersion || j.at("kind").get<std::string>() != "builtin") {
        throw DataError("unsupported acceptability model version or kind");
      }
      const auto names = j.at("features").get<std::vector<std::string>>();
      if (names.size() != kFeatureCount || !std::equal(names.begin(), names.end(), feature_names().begin())) {
        throw DataError("acceptability model has a different feature set");
      }
      m.mean_ = j.at("mean").get<std::array<double, kFeatureCount>>();
      m.scale_ = j.at("scale").get<std::array<double, kFeatureCount>>();
      m.weights_ = j.at("weights").get<std::array<double, kFeatureCount>>();
      m.bias_ = j.at("bias").get<double>();
      m.feature_cfg_.coverage_threshold = j.at("coverage_threshold").get<double>();
      m.feature_cfg_.source_scheme = parse_scheme(j.at("source_scheme").get<std::string>());
      m.feature_cfg_.target_scheme = parse_scheme(j.at("target_scheme").get<std::string>());
      m.forward_ = j.at("forward").get<Lexicon>();
      m.backward_ = j.at("backward").get<Lexicon>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed acceptability model: ") + e.what());
    }
    for (double s : m.scale_) {
      if (!(s > 0.0)) throw DataError("malformed acceptability model: non-positive feature scale");
    }
    return m;
  }

  void save(const std::string& path) const { write_file(path, to_json().dump(1) + "\n"); }

  static BuiltinAcceptability load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("cannot parse acceptability model '" + path + "': " + e.what());
    }
    return from_json(j);
  }

 private:
  std::array<double, kFeatureCount> mean_{};
  std::array<double, kFeatureCount> scale_{1, 1, 1, 1, 1, 1, 1, 1};
  std::array<double, kFeatureCount> weights_{};
  double bias_ = 0.0;
  FeatureConfig feature_cfg_;
  Lexicon forward_, backward_;
};

// Either a built-in model or an external process speaking score=parallelism.
class AcceptabilityScorer {
 public:
  explicit AcceptabilityScorer(const BuiltinAcceptability& model) : builtin_(&model) {}
  explicit AcceptabilityScorer(ExternalScorer& external) : external_(&external) {
    if (external.kind() != ScoreKind::parallelism) throw ConfigError("acceptability scorer must serve score=parallelism");
  }

  // Scores in input order; empty sides score 0 and are never sent out.
  std::vector<double> score_batch(std::span<const SentencePair> pairs, std::size_t workers = 1) const {
    std::vector<double> out(pairs.size(), 0.0);
    if (builtin_) {
      parallel_for(pairs.size(), workers, [&](std::size_t i) { out[i] = builtin_->score(pairs[i]); });
      return out;
    }
    std::vector<SentencePair> pending;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (char_length(pairs[i].source) == 0 || char_length(pairs[i].target) == 0) continue;
      pending.push_back(pairs[i]);
      where.push_back(i);
    }
    if (!pending.empty()) {
      const auto s = external_->scores(pending);
      for (std::size_t j = 0; j < where.size(); ++j) out[where[j]] = s[j];
    }
    return out;
  }

  double score(const SentencePair& pair) const { return score_batch(std::span(&pair, 1)).front(); }

 private:
  const BuiltinAcceptability* builtin_ = nullptr;
  ExternalScorer* external_ = nullptr;
};

enum class MiningRule { product, sequential };

inline MiningRule parse_mining_rule(std::string_view s) {
  if (s == "product") return MiningRule::product;
  if (s == "sequential") return MiningRule::sequential;
  throw ConfigError("unknown --combine '" + std::string(s) + "' (expected product|sequential)");
}

// Ranks pairs by alignment and domain evidence and takes them until the word
// budget is crossed. `product` ranks by the product of min-max normalized
// columns; `sequential` drops pairs whose domain score is 0 and ranks the
// rest by alignment score.
inline Selection mine_unsupervised_positives(std::span<const std::uint64_t> ids,
                                             std::span<const double> alignment, std::span<const double> domain,
                                             std::span<const std::uint64_t> word_counts, std::uint64_t budget,
                                             MiningRule rule, std::vector<std::string>* warnings = nullptr) {
  if (alignment.size() != ids.size() || domain.size() != ids.size() || word_counts.size() != ids.size()) {
    throw ConfigError("mining inputs differ in length");
  }
  Selection sel;
  if (ids.empty()) {
    sel.budget_exceeds_corpus = true;
  } else if (rule == MiningRule::product) {
    const auto a = minmax_normalize(alignment);
    const auto d = minmax_normalize(domain);
    std::vector<double> rank(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) rank[i] = a[i] * d[i];
    sel = select_by_budget(rank, ids, word_counts, budget);
  } else {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (domain[i] > 0.0) kept.push_back(i);
    }
    std::vector<double> a;
    std::vector<std::uint64_t> kid, kw;
    for (auto i : kept) {
      a.push_back(alignment[i]);
      kid.push_back(ids[i]);
      kw.push_back(word_counts[i]);
    }
    if (kept.empty()) {
      sel.budget_exceeds_corpus = true;
    } else {
      sel = select_by_budget(a, kid, kw, budget);
      for (auto& i : sel.indices) i = kept[i];
    }
  }
  if (sel.budget_exceeds_corpus && warnings) {
    warnings->push_back("word budget exceeds the eligible corpus; returning every eligible pair");
  }
  return sel;
}

}  // namespace sieve
