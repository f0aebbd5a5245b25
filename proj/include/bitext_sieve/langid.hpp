#pragma once

// Character n-gram language identifier (multinomial logistic regression over
// hashed features) and the binary language-detection filter.
//
// Features are the n-grams (1 <= n <= n_max) of each whitespace-delimited word
// padded with one boundary space on either side, hashed into a fixed number
// of buckets and normalized to relative frequencies. Repeating a text with a
// separating space therefore leaves its feature vector unchanged.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bitext_sieve/core.hpp"

namespace sieve {

struct LangIdConfig {
  int n_max = 4;
  std::uint32_t buckets = 1u << 20;
  int epochs = 5;
  double learning_rate = 10.0;  // features sum to 1 per text, so steps are small
  std::uint64_t seed = 0;
};

struct Detection {
  std::string language;
  double confidence = 0.0;
};

struct LabeledText {
  std::string text;
  std::string language;
};

inline constexpr std::string_view kUndetermined = "und";

class LangIdModel {
 public:
  static constexpr int kFormatVersion = 1;

  using Features = std::vector<std::pair<std::uint32_t, double>>;

  const std::vector<std::string>& languages() const { return languages_; }
  int n_max() const { return n_max_; }
  std::uint32_t buckets() const { return buckets_; }

  Features features(std::string_view text) const { return extract(text, n_max_, buckets_); }

  // Probability per language, aligned with languages().
  std::vector<double> distribution(std::string_view text) const { return softmax(features(text)); }

  Detection detect(std::string_view text) const {
    const auto feats = features(text);
    if (feats.empty()) return {std::string(kUndetermined), 0.0};
    const auto probs = softmax(feats);
    // First maximum wins: languages are sorted, so ties go to the smallest code.
    const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    return {languages_[best], probs[best]};
  }

  static LangIdModel train(const std::vector<LabeledText>& labeled, const LangIdConfig& cfg) {
    if (cfg.n_max < 1) throw ConfigError("n_max must be >= 1");
    if (cfg.buckets == 0) throw ConfigError("buckets must be > 0");
    if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0)) throw ConfigError("epochs and learning rate must be positive");
    std::set<std::string> langs;
    for (const auto& s : labeled) langs.insert(s.language);
    if (langs.size() < 2) {
      throw ConfigError("language identification needs at least 2 distinct languages, got " +
                        std::to_string(langs.size()));
    }
    LangIdModel m;
    m.languages_.assign(langs.begin(), langs.end());
    m.n_max_ = cfg.n_max;
    m.buckets_ = cfg.buckets;
    const std::size_t L = m.languages_.size();
    m.weights_.assign(static_cast<std::size_t>(cfg.buckets) * L, 0.0);
    m.bias_.assign(L, 0.0);

    std::vector<Features> feats;
    std::vector<std::size_t> labels;
    feats.reserve(labeled.size());
    for (const auto& s : labeled) {
      feats.push_back(m.features(s.text));
      labels.push_back(static_cast<std::size_t>(
          std::lower_bound(m.languages_.begin(), m.languages_.end(), s.language) - m.languages_.begin()));
    }

    std::vector<std::size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      const double lr = cfg.learning_rate / (1.0 + epoch);
      for (const std::size_t i : order) {
        if (feats[i].empty()) continue;
        auto probs = m.softmax(feats[i]);
        probs[labels[i]] -= 1.0;  // gradient of cross-entropy wrt logits
        for (std::size_t l = 0; l < L; ++l) {
          const double g = lr * probs[l];
          m.bias_[l] -= g;
          for (const auto& [bucket, value] : feats[i]) m.weights_[bucket * L + l] -= g * value;
        }
      }
    }
    return m;
  }

  // Line 1: JSON header with version, languages, n_max, buckets and biases.
  // Then one dense JSON array of |languages| weights per bucket, in bucket order.
  void write(std::ostream& out) const {
    nlohmann::ordered_json header;
    header["version"] = kFormatVersion;
    header["languages"] = languages_;
    header["n_max"] = n_max_;
    header["buckets"] = buckets_;
    header["bias"] = bias_;
    out << header.dump() << '\n';
    const std::size_t L = languages_.size();
    std::string row;
    char buf[64];
    for (std::size_t b = 0; b < buckets_; ++b) {
      row.assign("[");
      for (std::size_t l = 0; l < L; ++l) {
        if (l) row.push_back(',');
        const auto res = std::to_chars(buf, buf + sizeof buf, weights_[b * L + l]);
        row.append(buf, res.ptr);
      }
      row.append("]\n");
      out << row;
    }
  }

  static LangIdModel read(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("language model file is empty");
    LangIdModel m;
    try {
      const auto header = nlohmann::json::parse(line);
      if (header.at("version").get<int>() != kFormatVersion) {
        throw DataError("unsupported language model version " + header.at("version").dump());
      }
      m.languages_ = header.at("languages").get<std::vector<std::string>>();
      m.n_max_ = header.at("n_max").get<int>();
      m.buckets_ = header.at("buckets").get<std::uint32_t>();
      m.bias_ = header.at("bias").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed language model header: ") + e.what());
    }
    const std::size_t L = m.languages_.size();
    if (L < 2 || m.bias_.size() != L || !std::is_sorted(m.languages_.begin(), m.languages_.end())) {
      throw DataError("language model header is inconsistent");
    }
    m.weights_.resize(static_cast<std::size_t>(m.buckets_) * L);
    for (std::size_t b = 0; b < m.buckets_; ++b) {
      if (!std::getline(in, line)) throw DataError("language model truncated at row " + std::to_string(b));
      if (line.size() < 2 || line.front() != '[' || line.back() != ']') {
        throw DataError("malformed weight row " + std::to_string(b));
      }
      std::string_view body(line);
      body = body.substr(1, body.size() - 2);
      std::size_t l = 0;
      while (true) {
        const auto comma = body.find(',');
        if (l >= L) throw DataError("weight row " + std::to_string(b) + " has too many entries");
        m.weights_[b * L + l++] = parse_double(body.substr(0, comma), "weight");
        if (comma == std::string_view::npos) break;
        body.remove_prefix(comma + 1);
      }
      if (l != L) throw DataError("weight row " + std::to_string(b) + " has " + std::to_string(l) + " entries");
    }
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file '" + path + "'");
    write(out);
  }

  static LangIdModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open language model '" + path + "'");
    return read(in);
  }

  static Features extract(std::string_view text, int n_max, std::uint32_t buckets) {
    std::map<std::uint32_t, double> counts;
    double total = 0.0;
    std::vector<std::string> word{" "};
    auto flush = [&] {
      if (word.size() == 1) return;
      word.push_back(" ");
      for (std::size_t i = 0; i < word.size(); ++i) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (int n = 1; n <= n_max && i + static_cast<std::size_t>(n) <= word.size(); ++n) {
          for (unsigned char c : word[i + static_cast<std::size_t>(n) - 1]) {
            h ^= c;
            h *= 0x100000001b3ULL;
          }
          const std::uint64_t key = (h ^ (static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ULL)) * 0xff51afd7ed558ccdULL;
          counts[static_cast<std::uint32_t>((key >> 17) % buckets)] += 1.0;
          total += 1.0;
        }
      }
      word.assign(1, " ");
    };
    for (std::size_t pos = 0; pos < text.size();) {
      const std::size_t start = pos;
      const char32_t cp = utf8::decode(text, pos);
      if (utf8::is_space(cp)) {
        flush();
      } else {
        word.emplace_back(text.substr(start, pos - start));
      }
    }
    flush();
    Features out(counts.begin(), counts.end());
    for (auto& f : out) f.second /= total;
    return out;
  }

 private:
  std::vector<double> softmax(const Features& feats) const {
    const std::size_t L = languages_.size();
    std::vector<double> logits = bias_;
    for (const auto& [bucket, value] : feats) {
      for (std::size_t l = 0; l < L; ++l) logits[l] += weights_[bucket * L + l] * value;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& v : logits) z += (v = std::exp(v - mx));
    for (auto& v : logits) v /= z;
    return logits;
  }

  std::vector<std::string> languages_;
  int n_max_ = 4;
  std::uint32_t buckets_ = 0;
  std::vector<double> weights_;  // bucket-major: weights_[bucket * |languages| + language]
  std::vector<double> bias_;
};

// 1 iff both sides are detected as the wanted languages, else 0.
inline double language_filter_score(const LangIdModel& model, const SentencePair& pair, std::string_view want_src,
                                    std::string_view want_tgt) {
  return model.detect(pair.source).language == want_src && model.detect(pair.target).language == want_tgt ? 1.0
                                                                                                             : 0.0;
}

inline std::vector<LabeledText> read_labeled_text(const std::string& path) {
  std::vector<LabeledText> out;
  std::uint64_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 'text<TAB>language'");
    }
    utf8::validate(line);
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

}  // namespace sieve
