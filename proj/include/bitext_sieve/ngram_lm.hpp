#pragma once

// Backoff n-gram language model with interpolated Kneser-Ney or add-k
// smoothing, ARPA persistence and word-normalized perplexity.
//
// Both smoothers are stored in backoff form: every stored n-gram carries its
// full conditional probability and every context carries the weight that
// scales the lower-order distribution for unseen continuations. For
// interpolated KN that weight is exactly the interpolation mass D*T(h)/A(h),
// so the backoff form reproduces the recursive definition without error.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bitext_sieve/core.hpp"

namespace sieve {

enum class Smoothing { kneser_ney, add_k };

inline Smoothing parse_smoothing(std::string_view s) {
  if (s == "kn" || s == "kneser-ney") return Smoothing::kneser_ney;
  if (s == "add-k" || s == "addk") return Smoothing::add_k;
  throw ConfigError("unknown smoothing '" + std::string(s) + "' (expected kn|add-k)");
}

struct LmConfig {
  int order = 3;
  Smoothing smoothing = Smoothing::kneser_ney;
  double discount = 0.75;  // KN
  double k = 0.01;         // add-k
  std::uint64_t min_count = 1;
};

struct Perplexity {
  double value = 0.0;
  std::size_t token_count = 0;
};

namespace lm_detail {

struct IdsHash {
  std::size_t operator()(const std::vector<std::uint32_t>& v) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto x : v) {
      h ^= x;
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

template <typename V>
using IdsMap = std::unordered_map<std::vector<std::uint32_t>, V, IdsHash>;

constexpr double kLn10 = 2.302585092994045684;

inline std::string format_log10(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace lm_detail

class NGramLM {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";
  // Log10 probability assigned to OOV words by models loaded without <unk>.
  static constexpr double kMissingUnkLog10 = -100.0;

  struct Entry {
    double log10_prob = 0.0;
    std::optional<double> log10_backoff;
  };

  int order() const { return static_cast<int>(tables_.size()); }

  // Size of the predictable vocabulary: every type except <s>.
  std::size_t vocab_size() const { return words_.size() - 1; }

  std::vector<std::string> prediction_vocab() const {
    std::vector<std::string> out;
    for (const auto& w : words_) {
      if (w != kBos) out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t ngram_count(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)).size(); }

  // Natural-log conditional probability of `word` after `context` (oldest
  // first; only the last order-1 entries are used).
  double log_cond(std::span<const std::string> context, std::string_view word) const {
    std::vector<std::uint32_t> ids;
    ids.reserve(context.size());
    for (const auto& c : context) ids.push_back(lookup(c));
    return log10_cond(ids, lookup(word)) * lm_detail::kLn10;
  }

  // Sum of ln P(x_i | x_<i) over the tokens and the closing </s>.
  double log_prob(const TokenSeq& x) const {
    std::vector<std::uint32_t> history{bos_};
    double total = 0.0;
    auto score = [&](std::uint32_t w) {
      const std::size_t keep = std::min<std::size_t>(history.size(), static_cast<std::size_t>(order() - 1));
      total += log10_cond(std::span(history).last(keep), w);
      history.push_back(w);
    };
    for (const auto& t : x.tokens) score(lookup(t));
    score(eos_);
    return total * lm_detail::kLn10;
  }

  Perplexity perplexity(const TokenSeq& x) const {
    if (x.empty()) throw DataError("empty sentence");
    const std::size_t n = x.size() + 1;
    return {std::exp(-log_prob(x) / static_cast<double>(n)), n};
  }

  // Every stored n-gram of order < N that carries a backoff weight, i.e.
  // every context with observed continuations.
  std::vector<std::vector<std::string>> contexts() const {
    std::vector<std::vector<std::string>> out;
    for (std::size_t n = 0; n + 1 < tables_.size(); ++n) {
      for (const auto& [key, e] : tables_[n]) {
        if (e.log10_backoff) out.push_back(strings(key));
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const Entry* find(std::span<const std::string> ngram) const {
    if (ngram.empty() || ngram.size() > tables_.size()) return nullptr;
    std::vector<std::uint32_t> ids;
    for (const auto& w : ngram) {
      auto it = ids_.find(w);
      if (it == ids_.end()) return nullptr;
      ids.push_back(it->second);
    }
    const auto& table = tables_[ngram.size() - 1];
    auto it = table.find(ids);
    return it == table.end() ? nullptr : &it->second;
  }

  void write_arpa(std::ostream& out) const {
    out << "\\data\\\n";
    for (std::size_t n = 0; n < tables_.size(); ++n) {
      out << "ngram " << (n + 1) << "=" << tables_[n].size() << "\n";
    }
    for (std::size_t n = 0; n < tables_.size(); ++n) {
      out << "\n\\" << (n + 1) << "-grams:\n";
      std::vector<std::pair<std::vector<std::string>, const Entry*>> rows;
      rows.reserve(tables_[n].size());
      for (const auto& [key, e] : tables_[n]) rows.emplace_back(strings(key), &e);
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [words, e] : rows) {
        out << lm_detail::format_log10(e->log10_prob) << '\t';
        for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
        if (e->log10_backoff) out << '\t' << lm_detail::format_log10(*e->log10_backoff);
        out << '\n';
      }
    }
    out << "\n\\end\\\n";
  }

  std::string to_arpa() const {
    std::ostringstream ss;
    write_arpa(ss);
    return ss.str();
  }

  static NGramLM read_arpa(std::istream& in) {
    NGramLM lm;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) -> void {
      throw DataError("ARPA line " + std::to_string(line_no) + ": " + msg);
    };
    auto next = [&]() -> bool {
      if (!std::getline(in, line)) return false;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    };
    bool found = false;
    while (next()) {
      if (line == "\\data\\") {
        found = true;
        break;
      }
    }
    if (!found) fail("missing \\data\\ header");
    std::vector<std::size_t> declared;
    while (next() && !line.empty()) {
      if (line.rfind("ngram ", 0) != 0) fail("expected 'ngram N=count'");
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected 'ngram N=count'");
      const auto n = std::stoul(line.substr(6, eq - 6));
      if (n != declared.size() + 1) fail("n-gram orders must be listed in sequence");
      declared.push_back(std::stoul(line.substr(eq + 1)));
    }
    if (declared.empty()) fail("no n-gram counts");
    lm.tables_.resize(declared.size());
    for (std::size_t n = 1; n <= declared.size(); ++n) {
      while (next() && line.empty()) {
      }
      if (line != "\\" + std::to_string(n) + "-grams:") fail("expected \\" + std::to_string(n) + "-grams:");
      for (std::size_t i = 0; i < declared[n - 1]; ++i) {
        if (!next()) fail("unexpected end of file");
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (!rest.empty()) {
          const auto start = rest.find_first_not_of(" \t");
          if (start == std::string_view::npos) break;
          rest.remove_prefix(start);
          const auto stop = rest.find_first_of(" \t");
          fields.push_back(rest.substr(0, stop));
          rest.remove_prefix(stop == std::string_view::npos ? rest.size() : stop);
        }
        if (fields.size() != n + 1 && fields.size() != n + 2) fail("wrong field count");
        Entry e;
        e.log10_prob = parse_double(fields[0], "log10 probability");
        if (fields.size() == n + 2) e.log10_backoff = parse_double(fields[n + 1], "log10 backoff");
        if (!std::isfinite(e.log10_prob) || e.log10_prob > 0.0) fail("probability out of (0,1]");
        std::vector<std::uint32_t> key;
        for (std::size_t j = 1; j <= n; ++j) key.push_back(lm.intern(std::string(fields[j])));
        if (!lm.tables_[n - 1].emplace(std::move(key), e).second) fail("duplicate n-gram");
      }
    }
    while (next() && line.empty()) {
    }
    if (line != "\\end\\") fail("missing \\end\\");
    lm.finish_vocab();
    return lm;
  }

  static NGramLM load_arpa(const std::string& path) {
    std::istringstream in(read_file(path));
    return read_arpa(in);
  }

  void save_arpa(const std::string& path) const { write_file(path, to_arpa()); }

 private:
  friend class LmTrainer;

  std::uint32_t intern(const std::string& w) {
    auto [it, inserted] = ids_.emplace(w, static_cast<std::uint32_t>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }

  void finish_vocab() {
    const auto find_id = [&](std::string_view w) -> std::optional<std::uint32_t> {
      auto it = ids_.find(std::string(w));
      if (it == ids_.end()) return std::nullopt;
      return it->second;
    };
    const auto bos = find_id(kBos);
    const auto eos = find_id(kEos);
    if (!bos || !eos) throw DataError("ARPA model must contain <s> and </s>");
    bos_ = *bos;
    eos_ = *eos;
    unk_ = find_id(kUnk);
  }

  std::uint32_t lookup(std::string_view w) const {
    auto it = ids_.find(std::string(w));
    if (it != ids_.end()) return it->second;
    return unk_ ? *unk_ : kOov;
  }

  double log10_cond(std::span<const std::uint32_t> context, std::uint32_t w) const {
    if (w == kOov) return kMissingUnkLog10;
    if (context.size() >= tables_.size()) context = context.last(tables_.size() - 1);
    double backoff = 0.0;
    std::vector<std::uint32_t> key;
    for (std::size_t start = 0; start <= context.size(); ++start) {
      const auto ctx = context.subspan(start);
      key.assign(ctx.begin(), ctx.end());
      key.push_back(w);
      const auto& table = tables_[key.size() - 1];
      if (auto it = table.find(key); it != table.end()) return backoff + it->second.log10_prob;
      if (!ctx.empty()) {
        key.pop_back();
        const auto& ctable = tables_[key.size() - 1];
        if (auto it = ctable.find(key); it != ctable.end() && it->second.log10_backoff) {
          backoff += *it->second.log10_backoff;
        }
      }
    }
    return kMissingUnkLog10;
  }

  std::vector<std::string> strings(const std::vector<std::uint32_t>& key) const {
    std::vector<std::string> out;
    out.reserve(key.size());
    for (auto id : key) out.push_back(words_[id]);
    return out;
  }

  static constexpr std::uint32_t kOov = UINT32_MAX;

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<lm_detail::IdsMap<Entry>> tables_;
  std::uint32_t bos_ = 0;
  std::uint32_t eos_ = 0;
  std::optional<std::uint32_t> unk_;
};

// Accumulates n-gram counts from a sentence stream, then estimates the model.
class LmTrainer {
 public:
  explicit LmTrainer(LmConfig cfg) : cfg_(cfg) {
    if (cfg_.order < 1 || cfg_.order > 5) {
      throw ConfigError("n-gram order must be in [1,5], got " + std::to_string(cfg_.order));
    }
    if (cfg_.smoothing == Smoothing::kneser_ney && !(cfg_.discount > 0.0 && cfg_.discount < 1.0)) {
      throw ConfigError("Kneser-Ney discount must be in (0,1)");
    }
    if (cfg_.smoothing == Smoothing::add_k && !(cfg_.k > 0.0)) throw ConfigError("add-k requires k > 0");
    if (cfg_.min_count < 1) throw ConfigError("min-count must be >= 1");
    model_.intern(std::string(NGramLM::kBos));
    model_.intern(std::string(NGramLM::kEos));
    model_.intern(std::string(NGramLM::kUnk));
    counts_.resize(static_cast<std::size_t>(cfg_.order));
  }

  void add(const TokenSeq& sentence) {
    std::vector<std::uint32_t> seq{bos()};
    for (const auto& t : sentence.tokens) seq.push_back(model_.intern(t));
    seq.push_back(eos());
    for (std::size_t i = 1; i < seq.size(); ++i) {
      for (std::size_t n = 1; n <= counts_.size() && n <= i + 1; ++n) {
        std::vector<std::uint32_t> key(seq.begin() + static_cast<std::ptrdiff_t>(i + 1 - n),
                                       seq.begin() + static_cast<std::ptrdiff_t>(i + 1));
        ++counts_[n - 1][key];
      }
    }
    ++sentences_;
  }

  std::uint64_t sentences() const { return sentences_; }

  NGramLM build() {
    if (sentences_ == 0) throw DataError("cannot train a language model on an empty corpus");
    NGramLM lm = cfg_.min_count > 1 ? map_rare_to_unk() : model_;
    lm.finish_vocab();
    lm.tables_.assign(counts_.size(), {});
    const auto adjusted = adjusted_counts();
    for (std::size_t n = 1; n <= counts_.size(); ++n) {
      estimate_order(lm, n, adjusted[n - 1]);
    }
    return lm;
  }

 private:
  using Counts = lm_detail::IdsMap<std::uint64_t>;

  std::uint32_t bos() const { return 0; }
  std::uint32_t eos() const { return 1; }
  std::uint32_t unk() const { return 2; }

  // Drops types seen fewer than min_count times from the vocabulary and folds
  // their counts into <unk>.
  NGramLM map_rare_to_unk() {
    std::vector<std::uint64_t> freq(model_.words_.size(), 0);
    for (const auto& [key, c] : counts_[0]) freq[key[0]] += c;
    NGramLM lm;
    std::vector<std::uint32_t> remap(model_.words_.size());
    for (std::uint32_t id = 0; id < model_.words_.size(); ++id) {
      const bool rare = id > unk() && freq[id] < cfg_.min_count;
      remap[id] = rare ? unk() : lm.intern(model_.words_[id]);
    }
    for (auto& table : counts_) {
      Counts merged;
      for (const auto& [key, c] : table) {
        auto mapped = key;
        for (auto& id : mapped) id = remap[id];
        merged[mapped] += c;
      }
      table = std::move(merged);
    }
    model_ = lm;
    return lm;
  }

  // KN replaces lower-order counts by continuation counts, except for
  // n-grams starting with <s>, which have no left extension.
  std::vector<Counts> adjusted_counts() const {
    std::vector<Counts> out = counts_;
    if (cfg_.smoothing != Smoothing::kneser_ney) return out;
    for (std::size_t n = 1; n < counts_.size(); ++n) {
      Counts cont;
      for (const auto& [key, c] : counts_[n]) {
        std::vector<std::uint32_t> suffix(key.begin() + 1, key.end());
        ++cont[suffix];
      }
      for (auto& [key, c] : out[n - 1]) {
        if (key[0] == bos()) continue;
        auto it = cont.find(key);
        c = it == cont.end() ? 0 : it->second;
      }
    }
    return out;
  }

  void estimate_order(NGramLM& lm, std::size_t n, const Counts& adjusted) const {
    auto& table = lm.tables_[n - 1];
    const double vocab = static_cast<double>(lm.vocab_size());

    struct ContextStats {
      double total = 0.0;
      std::uint64_t types = 0;
      double seen_lower = 0.0;  // lower-order mass of the observed continuations
    };
    lm_detail::IdsMap<ContextStats> ctx_stats;
    for (const auto& [key, c] : adjusted) {
      if (c == 0) continue;
      std::vector<std::uint32_t> ctx(key.begin(), key.end() - 1);
      auto& s = ctx_stats[ctx];
      s.total += static_cast<double>(c);
      ++s.types;
    }

    if (n == 1) {
      const auto& s = ctx_stats[{}];
      for (std::uint32_t w = 0; w < lm.words_.size(); ++w) {
        if (w == bos()) {
          table[{w}] = {-99.0, std::nullopt};
          continue;
        }
        auto it = adjusted.find({w});
        const double c = it == adjusted.end() ? 0.0 : static_cast<double>(it->second);
        double p = 0.0;
        if (cfg_.smoothing == Smoothing::kneser_ney) {
          const double gamma = cfg_.discount * static_cast<double>(s.types) / s.total;
          p = std::max(c - cfg_.discount, 0.0) / s.total + gamma / vocab;
        } else {
          p = (c + cfg_.k) / (s.total + cfg_.k * vocab);
        }
        table[{w}] = {std::log10(p), std::nullopt};
      }
    } else {
      std::vector<std::pair<std::vector<std::uint32_t>, std::uint64_t>> sorted(adjusted.begin(), adjusted.end());
      std::sort(sorted.begin(), sorted.end());
      for (const auto& [key, c] : sorted) {
        if (c == 0) continue;
        std::vector<std::uint32_t> ctx(key.begin(), key.end() - 1);
        auto& s = ctx_stats.at(ctx);
        const std::span<const std::uint32_t> lower_ctx(ctx.data() + 1, ctx.size() - 1);
        const double lower = std::pow(10.0, lm.log10_cond(lower_ctx, key.back()));
        s.seen_lower += lower;
        double p = 0.0;
        if (cfg_.smoothing == Smoothing::kneser_ney) {
          const double gamma = cfg_.discount * static_cast<double>(s.types) / s.total;
          p = (static_cast<double>(c) - cfg_.discount) / s.total + gamma * lower;
        } else {
          p = (static_cast<double>(c) + cfg_.k) / (s.total + cfg_.k * vocab);
        }
        table[key] = {std::log10(p), std::nullopt};
      }
    }

    // Backoff weights live on the context entries of order n-1.
    if (n == 1) return;
    auto& ctx_table = lm.tables_[n - 2];
    std::vector<std::vector<std::uint32_t>> ctxs;
    ctxs.reserve(ctx_stats.size());
    for (const auto& [ctx, s] : ctx_stats) ctxs.push_back(ctx);
    std::sort(ctxs.begin(), ctxs.end());
    for (const auto& ctx : ctxs) {
      const auto& s = ctx_stats.at(ctx);
      double weight = 1.0;
      if (cfg_.smoothing == Smoothing::kneser_ney) {
        weight = cfg_.discount * static_cast<double>(s.types) / s.total;
      } else if (static_cast<double>(s.types) < vocab) {
        // Mass left for unseen continuations, spread over the lower order
        // proportionally to its probability of those continuations.
        const double left = cfg_.k * (vocab - static_cast<double>(s.types)) / (s.total + cfg_.k * vocab);
        weight = left / (1.0 - s.seen_lower);
      }
      auto it = ctx_table.find(ctx);
      if (it == ctx_table.end()) {
        throw Error("internal: context missing from lower-order table");
      }
      it->second.log10_backoff = std::log10(weight);
    }
  }

  LmConfig cfg_;
  NGramLM model_;
  std::vector<Counts> counts_;
  std::uint64_t sentences_ = 0;
};

template <typename Range>
NGramLM train_lm(const Range& corpus, const LmConfig& cfg) {
  LmTrainer trainer(cfg);
  for (const TokenSeq& s : corpus) trainer.add(s);
  return trainer.build();
}

}  // namespace sieve
