// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runtime limits are part of each criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bitext_sieve/cli.hpp"
#include "support/align_oracle.hpp"
#include "support/lm_oracle.hpp"
#include "support/selection_oracle.hpp"
#include "support/temp_dir.hpp"

namespace sieve {
namespace {

using testing::fixture;
using testing::TempDir;

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream msg;
    msg << std::setprecision(17) << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::abs(got - want) <= tol, msg.str());
  }
  void note(const std::string& s) { notes_.push_back(s); }

  std::size_t checks_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<void(Check&)> body;
};

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bitext-sieve");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << "  cli " << args[1] << " exited " << code << ": " << err.str();
  return code;
}

std::vector<std::string> words(const std::string& s) { return tokenize(s, Scheme::whitespace).tokens; }

// ---------------------------------------------------------------------------

NGramLM uniform_lm(int v) {
  std::ostringstream arpa;
  arpa << std::setprecision(17);
  const double lp = -std::log10(static_cast<double>(v));
  arpa << "\\data\\\nngram 1=" << v + 1 << "\n\n\\1-grams:\n";
  arpa << lp << "\t</s>\n-99\t<s>\n" << lp << "\t<unk>\n";
  for (int i = 0; i < v - 2; ++i) arpa << lp << "\tw" << i << "\n";
  arpa << "\n\\end\\\n";
  std::istringstream in(arpa.str());
  return NGramLM::read_arpa(in);
}

TokenSeq uniform_sentence(std::size_t n) {
  TokenSeq t;
  for (std::size_t i = 0; i < n; ++i) t.tokens.push_back("w" + std::to_string(i % 3));
  return t;
}

void formula_suite(Check& c) {
  c.expect(clip(7.2, 5) == 5.0, "clip(7.2, 5) == 5");
  c.expect(clip(3.0, 5) == 3.0, "clip(3, 5) == 3");
  c.expect(cutoff(1.2, 1.5) == 0.0, "cutoff(1.2, 1.5) == 0");
  c.expect(cutoff(1.6, 1.5) == 1.6, "cutoff(1.6, 1.5) == 1.6");
  c.expect(cutoff(1.5, 1.5) == 0.0, "cutoff at threshold is 0");
  const DomainThresholds t;
  c.expect(domain_from_raw(7.2, t) == 5.0, "domain 7.2 -> 5");
  c.expect(domain_from_raw(1.2, t) == 0.0, "domain 1.2 -> 0");
  c.expect(domain_from_raw(3.3, t) == 3.3, "domain 3.3 -> 3.3");
  const auto lm200 = uniform_lm(200), lm50 = uniform_lm(50);
  c.near(domain_raw(lm200, lm50, uniform_sentence(9)), 4.0, 1e-9, "PPL 200 / PPL 50");
  c.near(domain_raw(lm50, lm50, uniform_sentence(4)), 1.0, 1e-12, "identical models");

  c.expect(minmax_normalize(std::vector<double>{2, 4, 6}) == std::vector<double>{0, 0.5, 1}, "minmax [2,4,6]");
  c.expect(minmax_normalize(std::vector<double>{5, 5, 5}) == std::vector<double>{1, 1, 1}, "minmax [5,5,5]");
  c.expect(minmax_normalize(std::vector<double>{3.7}) == std::vector<double>{1.0}, "minmax [3.7]");
  bool threw = false;
  try {
    minmax_normalize(std::vector<double>{});
  } catch (const DataError&) {
    threw = true;
  }
  c.expect(threw, "minmax of empty list is an error");

  c.near(combine(1.0, 0.8, 0.5), 0.4, 1e-15, "combine(1, 0.8, 0.5)");
  c.expect(combine(0.0, 0.9, 0.7) == 0.0, "language 0 annihilates");
  c.expect(combine(1.0, 1.0, 1.0) == 1.0, "combine identity");

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> raw(0.0, 10.0), tau(0.01, 4.0), u(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double x = raw(rng), tc = tau(rng);
    const double y = cutoff(x, tc);
    c.expect(y == 0.0 || y > tc, "cutoff emitted a value in (0, tau]");
    const DomainThresholds th{tc + 1.0, tc};
    const double d = domain_from_raw(x, th);
    c.expect(d == 0.0 || (d > tc && d <= th.clip), "domain score outside {0} U (cutoff, clip]");
  }
  for (int i = 0; i < 10000; ++i) {
    const double l = static_cast<double>(rng() % 2), a = u(rng), d = u(rng), bump = u(rng);
    const double base = combine(l, a, d);
    c.expect(base <= combine(l, std::min(1.0, a + bump), d), "combine not monotone in acceptability");
    c.expect(base <= combine(l, a, std::min(1.0, d + bump)), "combine not monotone in domain");
    c.expect(base <= combine(1.0, a, d), "combine not monotone in language");
  }
}

// ---------------------------------------------------------------------------

void lm_oracle(Check& c) {
  using testing::LmOracle;
  std::size_t models = 0, queries_checked = 0;
  for (int types = 1; types <= 5; ++types) {
    std::vector<std::string> alphabet;
    for (int i = 0; i < types; ++i) alphabet.push_back(std::string(1, static_cast<char>('a' + i)));
    for (int order = 1; order <= 3; ++order) {
      for (auto kind : {LmOracle::Kind::kneser_ney, LmOracle::Kind::add_k}) {
        std::mt19937 rng(static_cast<unsigned>(types * 1000 + order * 10 + static_cast<int>(kind)));
        for (int trial = 0; trial < 20; ++trial) {
          std::vector<std::vector<std::string>> corpus;
          std::size_t tokens = 0;
          const std::size_t budget = 1 + rng() % 50;
          while (true) {
            const std::size_t len = 1 + rng() % 6;
            if (tokens + len > budget) break;
            std::vector<std::string> s;
            for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
            tokens += len;
            corpus.push_back(std::move(s));
          }
          if (corpus.empty()) corpus.push_back({alphabet[rng() % alphabet.size()]});

          LmConfig cfg;
          cfg.order = order;
          cfg.smoothing = kind == LmOracle::Kind::kneser_ney ? Smoothing::kneser_ney : Smoothing::add_k;
          std::vector<TokenSeq> seqs;
          for (const auto& s : corpus) seqs.push_back({s, Scheme::whitespace});
          const auto lm = train_lm(seqs, cfg);
          const LmOracle oracle(corpus, order, kind, kind == LmOracle::Kind::kneser_ney ? cfg.discount : cfg.k);
          ++models;

          auto symbols = alphabet;
          symbols.push_back("zz");  // out of vocabulary
          std::vector<std::vector<std::string>> queries{{}};
          for (std::size_t q = 0; q < queries.size(); ++q) {
            if (queries[q].size() == 3) continue;
            for (const auto& s : symbols) {
              auto next = queries[q];
              next.push_back(s);
              queries.push_back(std::move(next));
            }
          }
          for (const auto& q : queries) {
            c.near(lm.log_prob({q, Scheme::whitespace}), oracle.log_prob(q), 1e-9, "log_prob vs oracle");
            ++queries_checked;
          }
          auto contexts = lm.contexts();
          contexts.push_back({});
          contexts.push_back({"zz"});
          contexts.push_back({alphabet[0], "zz"});
          for (const auto& ctx : contexts) {
            double sum = 0.0;
            for (const auto& v : lm.prediction_vocab()) sum += std::exp(lm.log_cond(ctx, v));
            c.near(sum, 1.0, 1e-6, "per-context sum");
          }
        }
      }
    }
  }
  for (int v : {2, 3, 4, 5, 17, 1000}) {
    const auto lm = uniform_lm(v);
    for (std::size_t n : {1u, 4u, 25u}) {
      c.near(lm.perplexity(uniform_sentence(n)).value, static_cast<double>(v), 1e-9, "uniform unigram PPL == |V|");
    }
  }
  c.note(std::to_string(models) + " models, " + std::to_string(queries_checked) + " queries");
}

// ---------------------------------------------------------------------------

void langid(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  LangIdConfig cfg;
  cfg.seed = 1;
  const auto model = LangIdModel::train(read_labeled_text(fixture("langid/train.tsv")), cfg);
  const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(train_s < 60.0, "training took " + std::to_string(train_s) + "s");
  c.expect(model.languages() == std::vector<std::string>{"de", "en", "ja"}, "languages [de, en, ja]");
  const auto test = read_labeled_text(fixture("langid/test.tsv"));
  c.expect(test.size() >= 200, "at least 200 test sentences");
  std::size_t correct = 0;
  for (const auto& s : test) {
    c.expect(utf8::codepoints(s.text).size() >= 20, "test sentence shorter than 20 characters");
    correct += model.detect(s.text).language == s.language;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(test.size());
  c.expect(acc >= 0.95, "held-out accuracy " + std::to_string(acc));
  c.note("accuracy " + std::to_string(acc) + " on " + std::to_string(test.size()) + ", training " +
         std::to_string(train_s) + "s");
}

// ---------------------------------------------------------------------------

void negative_sampling(Check& c) {
  const auto clean = read_bitext(fixture("parallel/clean.tsv"));
  std::vector<SentencePair> corpus;
  for (int rep = 0; rep < 15; ++rep) {
    for (const auto& p : clean) {
      corpus.push_back(p);
      corpus.back().id = corpus.size() - 1;
    }
  }
  CorruptionPolicy policy;
  policy.seed = 20240;
  const auto set = build_training_set(corpus, policy, 1);
  std::size_t negatives = 0;
  std::array<std::size_t, 4> tags{};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& pos = corpus[i];
    const auto& neg = set[2 * i + 1];
    c.expect(set[2 * i].label == 1 && set[2 * i].pair == pos, "positive copied through");
    c.expect(neg.label == 0, "negative labeled 0");
    ++negatives;
    ++tags[static_cast<std::size_t>(neg.tag)];
    const Side side = neg.pair.source != pos.source ? Side::source : Side::target;
    if (neg.tag == Corruption::truncate) {
      const auto in = words(pos.side(side)), out = words(neg.pair.side(side));
      const double n = static_cast<double>(in.size());
      const std::size_t removed = in.size() - out.size();
      c.expect(removed >= static_cast<std::size_t>(std::ceil(0.3 * n)) &&
                   removed <= static_cast<std::size_t>(std::ceil(0.7 * n)),
               "truncate removed " + std::to_string(removed) + " of " + std::to_string(in.size()));
      c.expect(std::equal(out.begin(), out.end(), in.begin()), "truncate keeps a prefix");
      c.expect(neg.pair.side(side == Side::source ? Side::target : Side::source) ==
                   pos.side(side == Side::source ? Side::target : Side::source),
               "truncate touches one side only");
    } else if (neg.tag == Corruption::swap) {
      auto a = words(pos.side(side)), b = words(neg.pair.side(side));
      c.expect(a != b, "swap differs from its positive");
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      c.expect(a == b, "swap preserves the token multiset");
    } else if (neg.tag == Corruption::adjacent) {
      c.expect(neg.pair.source == pos.source && neg.pair.target == corpus[neg.origin].target, "adjacent target");
      c.expect(neg.origin != i && std::max<std::uint64_t>(neg.origin, i) - std::min<std::uint64_t>(neg.origin, i) <= 2,
               "adjacent within window");
    } else {
      c.expect(false, "negative without a corruption tag");
    }
  }
  c.expect(negatives == 30000, "30000 negatives");
  for (auto tag : {Corruption::adjacent, Corruption::truncate, Corruption::swap}) {
    const double f = static_cast<double>(tags[static_cast<std::size_t>(tag)]) / static_cast<double>(negatives);
    c.expect(std::abs(f - 1.0 / 3.0) <= 0.017, std::string(to_string(tag)) + " fraction " + std::to_string(f));
  }
  const auto bytes = format_labeled_set(set);
  c.expect(format_labeled_set(build_training_set(corpus, policy, 1)) == bytes, "second run byte-identical");
  c.expect(format_labeled_set(build_training_set(corpus, policy, 8)) == bytes, "8 workers byte-identical");
  c.note("adjacent/truncate/swap = " + std::to_string(tags[1]) + "/" + std::to_string(tags[2]) + "/" +
         std::to_string(tags[3]));
}

// ---------------------------------------------------------------------------

void end_to_end(Check& c) {
  TempDir dir;
  const auto lab = dir.file("labeled.tsv"), model = dir.file("accept.json"), scored = dir.file("scored.tsv");
  c.expect(run_cli({"gen-synth", "--pos", fixture("parallel/clean.tsv"), "--out", lab, "--seed", "11"}) == 0,
           "gen-synth");
  c.expect(run_cli({"train-accept", "--labeled", lab, "--out", model, "--seed", "11"}) == 0, "train-accept");
  c.expect(run_cli({"score", "--in", fixture("parallel/noisy.tsv"), "--out", scored, "--accept", model}) == 0,
           "score");
  const auto s = read_scored(scored);
  const auto scores = s.column("accept");
  const auto labels = read_labels_for(fixture("parallel/noisy.labels.tsv"), s.ids);
  std::size_t noise = 0;
  for (int l : labels) noise += l == 0;
  c.expect(labels.size() == 5000 && noise == 1200, "fixture has 5000 pairs with 24% noise");
  const double auc = roc_auc(scores, labels);
  c.expect(auc >= 0.9, "held-out AUC " + std::to_string(auc));
  std::optional<PRPoint> best;
  for (const auto& p : pr_curve(scores, labels, parse_grid("0:1:0.01"))) {
    if (p.precision >= 0.9 && p.recall >= 0.5 && (!best || p.recall > best->recall)) best = p;
  }
  c.expect(best.has_value(), "no threshold reaches precision >= 0.9 at recall >= 0.5");
  std::ostringstream note;
  note << "AUC " << format_score(auc);
  if (best) {
    note << "; at threshold " << best->threshold << " precision " << format_score(best->precision) << " recall "
         << format_score(best->recall);
  }
  c.note(note.str());
}

// ---------------------------------------------------------------------------

std::vector<double> char_lengths(const std::vector<std::string>& doc) {
  std::vector<double> out;
  for (const auto& s : doc) out.push_back(static_cast<double>(char_length(s)));
  return out;
}

void alignment(Check& c) {
  const testing::AlignOracle oracle;
  const auto clean = read_bitext(fixture("parallel/clean.tsv"));
  std::size_t docs = 0;
  for (std::size_t S = 1; S <= 6; ++S) {
    for (std::size_t T = 1; T <= 6; ++T) {
      for (std::size_t offset : {0u, 1u, 3u, 50u, 400u}) {
        std::vector<std::string> src, tgt;
        const std::size_t base = (S * 37 + T * 11) % 1000;
        for (std::size_t i = 0; i < S; ++i) src.push_back(clean[base + i].source);
        for (std::size_t j = 0; j < T; ++j) tgt.push_back(clean[base + offset + j].target);
        const auto a = align_doc(src, tgt, AlignmentParams{});
        c.near(a.cost, oracle.brute_force_cost(char_lengths(src), char_lengths(tgt)), 1e-9,
               "DP vs brute force " + std::to_string(S) + "x" + std::to_string(T));
        ++docs;
      }
    }
  }
  const auto dict = load_dictionary(fixture("parallel/dict.tsv"));
  AlignmentParams params;
  params.dictionary = &dict;
  std::size_t pairs = 0;
  for (const auto& p : read_bitext(fixture("parallel/noisy.tsv"))) {
    const auto s = words(p.source), t = words(p.target);
    std::size_t covered = 0;
    for (const auto& w : s) {
      const auto it = dict.find(w);
      if (it == dict.end()) continue;
      covered += std::any_of(t.begin(), t.end(), [&](const std::string& x) { return it->second.count(x) > 0; });
    }
    const double cov = s.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(s.size());
    const double want = oracle.log_match(static_cast<double>(char_length(p.source)),
                                         static_cast<double>(char_length(p.target))) -
                        (1.0 - cov);
    c.near(pair_alignment_score(p, params), want, 1e-9, "pair score vs formula, pair " + std::to_string(p.id));
    ++pairs;
  }
  c.note(std::to_string(docs) + " documents, " + std::to_string(pairs) + " pairs");
}

// ---------------------------------------------------------------------------

void selection(Check& c) {
  std::mt19937_64 rng(777);
  std::size_t ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testing::random_ranked_fixture(rng, 100);
    std::vector<double> sorted = f.scores;
    std::sort(sorted.begin(), sorted.end());
    ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    std::uint64_t total = 0;
    for (auto w : f.words) total += w;
    for (std::uint64_t budget : {std::uint64_t{1}, total / 4, total / 2, total - 1, total, total + 10}) {
      if (budget == 0) continue;
      const auto sel = select_by_budget(f.scores, f.ids, f.words, budget);
      c.expect(sel.indices == testing::oracle_budget(f, budget), "budget selection differs from oracle");
      // crossing rule: the prefix without its last pair is still under budget
      std::uint64_t before_last = sel.words;
      if (!sel.indices.empty()) before_last -= f.words[sel.indices.back()];
      c.expect(before_last < budget, "selection continued past the budget");
      c.expect(sel.words >= budget || sel.indices.size() == f.scores.size(), "selection stopped short of budget");
    }
    for (double pct : {0.5, 1.0, 10.0, 33.3, 50.0, 66.7, 99.0, 100.0}) {
      c.expect(select_top_percent(f.scores, f.ids, pct).indices == testing::oracle_top_percent(f, pct),
               "top-percent selection differs from oracle");
    }
  }
  c.expect(ties == 100, "every fixture contains ties");
  const std::vector<double> s{0.9, 0.8, 0.1};
  const std::vector<std::uint64_t> ids{0, 1, 2}, w{5, 5, 5};
  c.expect(select_by_budget(s, ids, w, 10).indices == std::vector<std::size_t>{0, 1}, "budget 10 -> first two");
  c.expect(select_by_budget(s, ids, w, 11).indices == std::vector<std::size_t>{0, 1, 2}, "crossing pair included");
}

// ---------------------------------------------------------------------------

void determinism(Check& c) {
  TempDir dir;
  const auto& d = dir;
  std::string targets;
  for (const auto& p : read_bitext(fixture("parallel/clean.tsv"))) targets += p.target + "\n";
  d.write("non.txt", targets);
  c.expect(run_cli({"train-langid", "--in", fixture("langid/train.tsv"), "--out", d.file("lid.json"), "--seed", "1"}) == 0,
           "train-langid");
  c.expect(run_cli({"train-lm", "--in", d.file("non.txt"), "--out", d.file("non.arpa")}) == 0, "train-lm non");
  c.expect(run_cli({"train-lm", "--in", fixture("parallel/in_domain.de.txt"), "--out", d.file("in.arpa")}) == 0,
           "train-lm in");
  c.expect(run_cli({"gen-synth", "--pos", fixture("parallel/clean.tsv"), "--out", d.file("lab.tsv"), "--seed", "5"}) == 0,
           "gen-synth");
  c.expect(run_cli({"train-accept", "--labeled", d.file("lab.tsv"), "--out", d.file("acc.json"), "--seed", "5"}) == 0,
           "train-accept");

  std::vector<std::string> reference;
  int run = 0;
  for (const char* threads : {"1", "8", "1", "8"}) {
    ::setenv("BITEXT_SIEVE_THREADS", threads, 1);
    const std::string tag = std::to_string(run++);
    const auto scored = d.file("scored" + tag + ".tsv");
    c.expect(run_cli({"score", "--in", fixture("parallel/noisy.tsv"), "--out", scored, "--langid", d.file("lid.json"),
                      "--accept", d.file("acc.json"), "--lm-in", d.file("in.arpa"), "--lm-non", d.file("non.arpa"),
                      "--clip", "2", "--cutoff", "1", "--block-size", "333"}) == 0,
             "score");
    c.expect(run_cli({"select", "--in", scored, "--out", d.file("budget" + tag + ".tsv"), "--budget-words", "20000"}) == 0,
             "select budget");
    c.expect(run_cli({"select", "--in", scored, "--out", d.file("top" + tag + ".tsv"), "--top-percent", "75"}) == 0,
             "select top");
    const std::vector<std::string> digests{sha256_file(scored), sha256_file(scored + ".stats.json"),
                                           sha256_file(d.file("budget" + tag + ".tsv")),
                                           sha256_file(d.file("top" + tag + ".tsv"))};
    if (reference.empty()) {
      reference = digests;
    } else {
      c.expect(digests == reference, std::string("digests differ with BITEXT_SIEVE_THREADS=") + threads);
    }
  }
  ::unsetenv("BITEXT_SIEVE_THREADS");
  const auto scored = read_scored(d.file("scored0.tsv"));
  std::size_t domain_kept = 0;
  for (const auto& s : scored.scores) domain_kept += s.domain > 0.0;
  c.expect(domain_kept > 0 && domain_kept < scored.size(), "domain column is informative");
  if (!reference.empty()) c.note("scored.tsv sha256 " + reference[0].substr(0, 16));
}

}  // namespace
}  // namespace sieve

int main() {
  using namespace sieve;
  const std::vector<Criterion> criteria{
      {"formula-suite", 5, formula_suite},     {"lm-oracle", 30, lm_oracle},
      {"langid", 60, langid},                  {"negative-sampling", 60, negative_sampling},
      {"end-to-end-benchmark", 300, end_to_end}, {"alignment", 60, alignment},
      {"selection", 60, selection},            {"determinism", 300, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(secs < cr.limit_seconds, "runtime " + std::to_string(secs) + "s over the limit");
    const bool ok = check.failed_ == 0;
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << cr.name << "  " << std::fixed << std::setprecision(2) << secs << "s (limit "
              << std::setprecision(0) << cr.limit_seconds << "s), " << check.checks_ << " checks";
    for (const auto& n : check.notes_) std::cout << "; " << n;
    std::cout << "\n";
    for (const auto& f : check.failures_) std::cout << "    " << f << "\n";
    if (check.failed_ > check.failures_.size()) {
      std::cout << "    ... " << check.failed_ - check.failures_.size() << " more\n";
    }
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed\n" : "acceptance: all passed\n");
  return failed ? 1 : 0;
}
