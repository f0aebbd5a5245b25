#pragma once

// Perplexity-ratio domain scoring. The raw score of a target sentence is
// PPL_N(t) / PPL_I(t) for a non-domain model N and an in-domain model I; the
// final domain score applies a cutoff and then a clip.

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bitext_sieve/core.hpp"
#include "bitext_sieve/ngram_lm.hpp"
#include "bitext_sieve/scorer_protocol.hpp"

namespace sieve {

struct DomainThresholds {
  double clip = 5.0;
  double cutoff = 1.5;

  void validate() const {
    if (!std::isfinite(clip) || !std::isfinite(cutoff)) throw ConfigError("domain thresholds must be finite");
    if (!(cutoff > 0.0)) throw ConfigError("--cutoff must be > 0");
    if (!(clip > cutoff)) throw ConfigError("--clip must be greater than --cutoff");
  }
};

inline double clip(double x, double tau_clip) { return std::min(x, tau_clip); }

// Values at or below the threshold become 0.
inline double cutoff(double x, double tau_cutoff) { return x > tau_cutoff ? x : 0.0; }

inline double domain_from_raw(double raw, const DomainThresholds& t) { return clip(cutoff(raw, t.cutoff), t.clip); }

inline double domain_raw(const NGramLM& non_domain, const NGramLM& in_domain, const TokenSeq& t) {
  if (t.empty()) throw DataError("empty sentence");
  return non_domain.perplexity(t).value / in_domain.perplexity(t).value;
}

// The in-domain model is either an n-gram model or an external process that
// speaks the scorer protocol with score=perplexity.
class DomainFilter {
 public:
  DomainFilter(const NGramLM& non_domain, const NGramLM& in_domain, DomainThresholds thresholds, Scheme scheme)
      : non_domain_(&non_domain), in_domain_(&in_domain), thresholds_(thresholds), scheme_(scheme) {
    thresholds_.validate();
  }

  DomainFilter(const NGramLM& non_domain, ExternalScorer& in_domain, DomainThresholds thresholds, Scheme scheme)
      : non_domain_(&non_domain), in_domain_(&in_domain), thresholds_(thresholds), scheme_(scheme) {
    thresholds_.validate();
    if (in_domain.kind() != ScoreKind::perplexity) throw ConfigError("in-domain scorer must serve score=perplexity");
  }

  const DomainThresholds& thresholds() const { return thresholds_; }
  bool external() const { return std::holds_alternative<ExternalScorer*>(in_domain_); }

  // Raw ratio per pair, or NaN for an empty target. Batched so that an
  // external in-domain model sees one request stream.
  std::vector<double> raw_batch(std::span<const SentencePair> pairs) const {
    std::vector<double> out(pairs.size(), std::nan(""));
    std::vector<TokenSeq> toks(pairs.size());
    std::vector<SentencePair> pending;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      toks[i] = tokenize(pairs[i].target, scheme_);
      if (toks[i].empty()) continue;
      if (const auto* lm = std::get_if<const NGramLM*>(&in_domain_)) {
        out[i] = domain_raw(*non_domain_, **lm, toks[i]);
      } else {
        pending.push_back(pairs[i]);
        where.push_back(i);
      }
    }
    if (!pending.empty()) {
      const auto ppl_in = std::get<ExternalScorer*>(in_domain_)->scores(pending);
      for (std::size_t j = 0; j < where.size(); ++j) {
        out[where[j]] = non_domain_->perplexity(toks[where[j]]).value / ppl_in[j];
      }
    }
    return out;
  }

  // Composed score in [0, clip]; an empty target scores 0.
  std::vector<double> score_batch(std::span<const SentencePair> pairs) const {
    auto out = raw_batch(pairs);
    for (double& v : out) v = std::isnan(v) ? 0.0 : domain_from_raw(v, thresholds_);
    return out;
  }

  double score(const SentencePair& pair) const { return score_batch(std::span(&pair, 1)).front(); }

 private:
  const NGramLM* non_domain_;
  std::variant<const NGramLM*, ExternalScorer*> in_domain_;
  DomainThresholds thresholds_;
  Scheme scheme_;
};

}  // namespace sieve
