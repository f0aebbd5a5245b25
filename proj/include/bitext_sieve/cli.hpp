#pragma once

// The bitext-sieve command line. Exit status: 0 success, 1 usage or
// configuration error, 2 data error, 3 scorer protocol error.

#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bitext_sieve/acceptability.hpp"
#include "bitext_sieve/align.hpp"
#include "bitext_sieve/core.hpp"
#include "bitext_sieve/domain_filter.hpp"
#include "bitext_sieve/eval.hpp"
#include "bitext_sieve/langid.hpp"
#include "bitext_sieve/manifest.hpp"
#include "bitext_sieve/ngram_lm.hpp"
#include "bitext_sieve/parallel.hpp"
#include "bitext_sieve/pipeline.hpp"
#include "bitext_sieve/scorer_protocol.hpp"
#include "bitext_sieve/selection.hpp"
#include "bitext_sieve/synth.hpp"
#include "bitext_sieve/unicode.hpp"

namespace sieve::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kProtocol = 3 };

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline nlohmann::ordered_json flags_of(const CLI::App& sub) {
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_name();
    if (name == "--help" || name == "-h") continue;
    if (o->count() > 0) {
      const auto& r = o->results();
      if (r.size() == 1) {
        flags[name] = r.front();
      } else {
        flags[name] = r;
      }
    } else if (!o->get_default_str().empty()) {
      flags[name] = o->get_default_str();
    } else {
      flags[name] = nullptr;
    }
  }
  return flags;
}

inline FractionRange parse_fraction_range(const std::string& s, const std::string& flag) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError(flag + " must look like lo:hi");
  try {
    return {parse_double(std::string_view(s).substr(0, colon), flag),
            parse_double(std::string_view(s).substr(colon + 1), flag)};
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

inline void report_skipped(const std::vector<Diagnostic>& diags, const std::string& path, std::ostream& err) {
  constexpr std::size_t kShown = 5;
  for (std::size_t i = 0; i < diags.size() && i < kShown; ++i) {
    err << "warning: " << path << ":" << diags[i].line + 1 << ": skipped: " << diags[i].message << "\n";
  }
  if (diags.size() > kShown) err << "warning: " << diags.size() << " malformed lines skipped in total\n";
}

inline std::vector<SentencePair> load_pairs(const std::string& path, bool strict, bool normalize, std::ostream& err) {
  std::vector<Diagnostic> diags;
  auto pairs = read_bitext(path, strict ? MalformedPolicy::abort : MalformedPolicy::skip, &diags);
  report_skipped(diags, path, err);
  if (normalize) {
    for (auto& p : pairs) nfc_in_place(p);
  }
  return pairs;
}

inline ScorerOptions scorer_options(std::size_t window, int timeout_ms, int retries) {
  if (window == 0) throw ConfigError("--window must be >= 1");
  if (timeout_ms <= 0) throw ConfigError("--timeout-ms must be > 0");
  if (retries < 0) throw ConfigError("--retries must be >= 0");
  ScorerOptions o;
  o.window = window;
  o.timeout_ms = timeout_ms;
  o.retries = retries;
  return o;
}

}  // namespace detail

// Each subcommand registers its options into a CLI::App and returns the
// action to run once parsing succeeds.
class Tool {
 public:
  explicit Tool(Streams io) : io_(io), app_("Parallel-corpus filtering toolkit", "bitext-sieve") {
    app_.require_subcommand(1);
    app_.set_version_flag("--version", std::string(kToolVersion));
    app_.footer("Worker threads: BITEXT_SIEVE_THREADS (default 1). Exit: 0 ok, 1 usage, 2 data, 3 protocol.");
    add_train_langid();
    add_train_lm();
    add_gen_synth();
    add_train_accept();
    add_align_score();
    add_score();
    add_select();
    add_eval_pr();
    add_stats();
  }

  int run(int argc, const char* const* argv) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      io_.out << help_for_parsed();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      io_.out << app_.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::CallForVersion&) {
      io_.out << kToolVersion << "\n";
      return kOk;
    } catch (const CLI::ParseError& e) {
      io_.err << "error: " << e.what() << "\n\n" << help_for_parsed();
      return kUsage;
    }
    for (auto& [sub, action] : actions_) {
      if (!sub->parsed()) continue;
      try {
        manifest_ = RunManifest{};
        manifest_.subcommand = sub->get_name();
        manifest_.flags = detail::flags_of(*sub);
        action();
        return kOk;
      } catch (const ConfigError& e) {
        io_.err << "error: " << e.what() << "\n";
        return kUsage;
      } catch (const ProtocolError& e) {
        io_.err << "protocol error: " << e.what() << "\n";
        return kProtocol;
      } catch (const std::exception& e) {
        io_.err << "error: " << e.what() << "\n";
        return kData;
      }
    }
    return kUsage;
  }

 private:
  std::string help_for_parsed() const {
    for (const auto& [sub, action] : actions_) {
      if (sub->parsed()) return sub->help();
    }
    return app_.help();
  }

  CLI::App* add(const std::string& name, const std::string& description, std::function<void()> action) {
    CLI::App* sub = app_.add_subcommand(name, description);
    actions_.emplace_back(sub, std::move(action));
    return sub;
  }

  void finish(const std::vector<std::string>& outputs) {
    for (const auto& o : outputs) manifest_.add_output(o);
    manifest_.write(outputs.front());
  }

  // --- train-langid -------------------------------------------------------
  struct {
    std::string in, out;
    LangIdConfig cfg;
  } langid_;

  void add_train_langid() {
    auto* s = add("train-langid", "Train the character n-gram language identifier", [this] {
      auto& a = langid_;
      if (a.cfg.n_max < 1) throw ConfigError("--nmax must be >= 1");
      if (a.cfg.epochs < 1) throw ConfigError("--epochs must be >= 1");
      manifest_.seed = a.cfg.seed;
      manifest_.add_input(a.in);
      const auto model = LangIdModel::train(read_labeled_text(a.in), a.cfg);
      model.save(a.out);
      finish({a.out});
    });
    s->add_option("--in", langid_.in, "Labeled TSV: text<TAB>language")->required();
    s->add_option("--out", langid_.out, "Model file (JSON lines)")->required();
    s->add_option("--nmax", langid_.cfg.n_max, "Largest character n-gram order")->capture_default_str();
    s->add_option("--buckets", langid_.cfg.buckets, "Hashed feature buckets")->capture_default_str();
    s->add_option("--epochs", langid_.cfg.epochs)->capture_default_str();
    s->add_option("--lr", langid_.cfg.learning_rate, "SGD learning rate")->capture_default_str();
    s->add_option("--seed", langid_.cfg.seed)->required();
  }

  // --- train-lm -----------------------------------------------------------
  struct {
    std::string in, out, smoothing = "kn", scheme = "whitespace";
    LmConfig cfg;
  } lm_;

  void add_train_lm() {
    auto* s = add("train-lm", "Train an n-gram language model and write ARPA", [this] {
      auto& a = lm_;
      a.cfg.smoothing = parse_smoothing(a.smoothing);
      const Scheme scheme = parse_scheme(a.scheme);
      manifest_.add_input(a.in);
      std::vector<TokenSeq> corpus;
      std::size_t line_no = 0;
      for (const auto& line : read_lines(a.in)) {
        ++line_no;
        try {
          utf8::validate(line);
        } catch (const IngestError& e) {
          throw DataError(a.in + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto t = tokenize(line, scheme);
        if (!t.empty()) corpus.push_back(std::move(t));
      }
      train_lm(corpus, a.cfg).save_arpa(a.out);
      finish({a.out});
    });
    s->add_option("--in", lm_.in, "Plain text, one sentence per line")->required();
    s->add_option("--out", lm_.out, "ARPA output")->required();
    s->add_option("--order", lm_.cfg.order)->capture_default_str();
    s->add_option("--smoothing", lm_.smoothing, "kn | add-k")->capture_default_str();
    s->add_option("--discount", lm_.cfg.discount, "Kneser-Ney discount")->capture_default_str();
    s->add_option("--k", lm_.cfg.k, "Add-k constant")->capture_default_str();
    s->add_option("--min-count", lm_.cfg.min_count, "Words seen fewer times map to <unk>")->capture_default_str();
    s->add_option("--scheme", lm_.scheme, "whitespace | character")->capture_default_str();
  }

  // --- gen-synth ----------------------------------------------------------
  struct {
    std::string pos, out, truncate = "0.3:0.7", swap = "0.3:0.7", src_scheme = "whitespace",
                          tgt_scheme = "whitespace";
    CorruptionPolicy policy;
    bool strict = false;
  } synth_;

  void add_gen_synth() {
    auto* s = add("gen-synth", "Build a balanced labeled set from clean positives", [this] {
      auto& a = synth_;
      a.policy.truncate = detail::parse_fraction_range(a.truncate, "--truncate");
      a.policy.swap = detail::parse_fraction_range(a.swap, "--swap");
      a.policy.source_scheme = parse_scheme(a.src_scheme);
      a.policy.target_scheme = parse_scheme(a.tgt_scheme);
      a.policy.validate();
      manifest_.seed = a.policy.seed;
      manifest_.add_input(a.pos);
      const auto pairs = detail::load_pairs(a.pos, a.strict, false, io_.err);
      write_file(a.out, format_labeled_set(build_training_set(pairs, a.policy, worker_count())));
      finish({a.out});
    });
    s->add_option("--pos", synth_.pos, "Clean parallel TSV")->required();
    s->add_option("--out", synth_.out, "Labeled TSV: source, target, label, tag")->required();
    s->add_option("--k", synth_.policy.window, "Adjacent-sentence window")->capture_default_str();
    s->add_option("--truncate", synth_.truncate, "Removed fraction range lo:hi")->capture_default_str();
    s->add_option("--swap", synth_.swap, "Permuted fraction range lo:hi")->capture_default_str();
    s->add_option("--src-scheme", synth_.src_scheme)->capture_default_str();
    s->add_option("--tgt-scheme", synth_.tgt_scheme)->capture_default_str();
    s->add_option("--seed", synth_.policy.seed)->required();
    s->add_flag("--strict", synth_.strict, "Abort on malformed input lines");
  }

  // --- train-accept -------------------------------------------------------
  struct {
    std::string labeled, out, src_scheme = "whitespace", tgt_scheme = "whitespace";
    AcceptTrainConfig cfg;
  } accept_;

  void add_train_accept() {
    auto* s = add("train-accept", "Train the built-in acceptability classifier", [this] {
      auto& a = accept_;
      a.cfg.features.source_scheme = parse_scheme(a.src_scheme);
      a.cfg.features.target_scheme = parse_scheme(a.tgt_scheme);
      manifest_.seed = a.cfg.seed;
      manifest_.add_input(a.labeled);
      std::vector<std::string> warnings;
      const auto model = BuiltinAcceptability::train(read_labeled_set(a.labeled), a.cfg, &warnings, worker_count());
      for (const auto& w : warnings) io_.err << "warning: " << w << "\n";
      model.save(a.out);
      finish({a.out});
    });
    s->add_option("--labeled", accept_.labeled, "Output of gen-synth")->required();
    s->add_option("--out", accept_.out, "Model file (JSON)")->required();
    s->add_option("--epochs", accept_.cfg.epochs)->capture_default_str();
    s->add_option("--lr", accept_.cfg.learning_rate)->capture_default_str();
    s->add_option("--l2", accept_.cfg.l2)->capture_default_str();
    s->add_option("--lexicon-iterations", accept_.cfg.lexicon_iterations)->capture_default_str();
    s->add_option("--src-scheme", accept_.src_scheme)->capture_default_str();
    s->add_option("--tgt-scheme", accept_.tgt_scheme)->capture_default_str();
    s->add_option("--seed", accept_.cfg.seed)->required();
  }

  // --- align-score --------------------------------------------------------
  struct {
    std::string in, out, dict, src_scheme = "whitespace", tgt_scheme = "whitespace";
    AlignmentParams params;
    bool strict = false, nfc = false;
  } align_;

  void add_align_score() {
    auto* s = add("align-score", "Append a length/dictionary alignment score column", [this] {
      auto& a = align_;
      a.params.source_scheme = parse_scheme(a.src_scheme);
      a.params.target_scheme = parse_scheme(a.tgt_scheme);
      a.params.validate();
      manifest_.add_input(a.in);
      Dictionary dict;
      if (!a.dict.empty()) {
        manifest_.add_input(a.dict);
        dict = load_dictionary(a.dict);
        a.params.dictionary = &dict;
      }
      const auto pairs = detail::load_pairs(a.in, a.strict, a.nfc, io_.err);
      const auto scores = alignment_scores(pairs, a.params, worker_count());
      std::string out;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        write_bitext_line(out, pairs[i]);
        out.push_back('\t');
        out += format_score(scores[i]);
        out.push_back('\n');
      }
      write_file(a.out, out);
      finish({a.out});
    });
    s->add_option("--in", align_.in, "Parallel TSV")->required();
    s->add_option("--out", align_.out, "Input columns plus the alignment score")->required();
    s->add_option("--dict", align_.dict, "Dictionary TSV: src_token<TAB>tgt_token");
    s->add_option("--c", align_.params.c, "Expected target/source length ratio")->capture_default_str();
    s->add_option("--s2", align_.params.s2, "Length variance per character")->capture_default_str();
    s->add_option("--coverage-weight", align_.params.coverage_weight)->capture_default_str();
    s->add_option("--src-scheme", align_.src_scheme)->capture_default_str();
    s->add_option("--tgt-scheme", align_.tgt_scheme)->capture_default_str();
    s->add_flag("--strict", align_.strict, "Abort on malformed input lines");
    s->add_flag("--nfc", align_.nfc, "NFC-normalize both sides first");
  }

  // --- score --------------------------------------------------------------
  struct {
    std::string in, out, langid, src_lang = "en", tgt_lang = "de", accept, accept_proto, lm_in, lm_in_proto, lm_non,
                                 domain_scheme = "whitespace";
    bool domain = false, strict = false, nfc = false;
    DomainThresholds thresholds;
    std::size_t window = 256, block = 4096;
    int timeout_ms = 30000, retries = 2;
  } score_;

  void add_score() {
    auto* s = add("score", "Score a bitext with the composed filters", [this] { run_score(); });
    s->add_option("--in", score_.in, "Parallel TSV")->required();
    s->add_option("--out", score_.out, "Scored TSV; also writes <out>.stats.json")->required();
    s->add_option("--langid", score_.langid, "Language identifier model");
    s->add_option("--src-lang", score_.src_lang)->capture_default_str();
    s->add_option("--tgt-lang", score_.tgt_lang)->capture_default_str();
    auto* acc = s->add_option("--accept", score_.accept, "Built-in acceptability model");
    auto* accp = s->add_option("--accept-proto", score_.accept_proto, "External scorer command (score=parallelism)");
    acc->excludes(accp);
    s->add_flag("--domain", score_.domain, "Enable the domain filter");
    auto* lmi = s->add_option("--lm-in", score_.lm_in, "In-domain ARPA model");
    auto* lmip = s->add_option("--lm-in-proto", score_.lm_in_proto, "External in-domain scorer (score=perplexity)");
    lmi->excludes(lmip);
    s->add_option("--lm-non", score_.lm_non, "Non-domain ARPA model");
    s->add_option("--clip", score_.thresholds.clip)->capture_default_str();
    s->add_option("--cutoff", score_.thresholds.cutoff)->capture_default_str();
    s->add_option("--domain-scheme", score_.domain_scheme, "Tokenization for the LMs")->capture_default_str();
    s->add_option("--window", score_.window, "External scorer in-flight window")->capture_default_str();
    s->add_option("--timeout-ms", score_.timeout_ms)->capture_default_str();
    s->add_option("--retries", score_.retries)->capture_default_str();
    s->add_option("--block-size", score_.block, "Records per scoring block")->capture_default_str();
    s->add_flag("--strict", score_.strict, "Abort on malformed input lines");
    s->add_flag("--nfc", score_.nfc, "NFC-normalize both sides first");
  }

  void run_score() {
    auto& a = score_;
    const bool want_domain = a.domain || !a.lm_in.empty() || !a.lm_in_proto.empty() || !a.lm_non.empty();
    if (want_domain) {
      if (a.lm_non.empty()) throw ConfigError("the domain filter needs --lm-non");
      if (a.lm_in.empty() && a.lm_in_proto.empty()) throw ConfigError("the domain filter needs --lm-in or --lm-in-proto");
      a.thresholds.validate();
    }
    if (a.block == 0) throw ConfigError("--block-size must be >= 1");
    const Scheme domain_scheme = parse_scheme(a.domain_scheme);
    const auto sopts = detail::scorer_options(a.window, a.timeout_ms, a.retries);

    manifest_.add_input(a.in);
    ScoringStages stages;
    std::optional<LangIdModel> langid;
    if (!a.langid.empty()) {
      manifest_.add_input(a.langid);
      langid = LangIdModel::load(a.langid);
      stages.langid = &*langid;
      stages.want_source = a.src_lang;
      stages.want_target = a.tgt_lang;
    }
    std::optional<BuiltinAcceptability> builtin;
    std::unique_ptr<ExternalScorer> accept_ext;
    std::optional<AcceptabilityScorer> accept;
    if (!a.accept.empty()) {
      manifest_.add_input(a.accept);
      builtin = BuiltinAcceptability::load(a.accept);
      accept.emplace(*builtin);
    } else if (!a.accept_proto.empty()) {
      accept_ext = std::make_unique<ExternalScorer>(a.accept_proto, ScoreKind::parallelism, sopts);
      accept.emplace(*accept_ext);
    }
    if (accept) stages.acceptability = &*accept;
    std::optional<NGramLM> lm_non, lm_in;
    std::unique_ptr<ExternalScorer> lm_ext;
    std::optional<DomainFilter> domain;
    if (want_domain) {
      manifest_.add_input(a.lm_non);
      lm_non = NGramLM::load_arpa(a.lm_non);
      if (!a.lm_in.empty()) {
        manifest_.add_input(a.lm_in);
        lm_in = NGramLM::load_arpa(a.lm_in);
        domain.emplace(*lm_non, *lm_in, a.thresholds, domain_scheme);
      } else {
        lm_ext = std::make_unique<ExternalScorer>(a.lm_in_proto, ScoreKind::perplexity, sopts);
        domain.emplace(*lm_non, *lm_ext, a.thresholds, domain_scheme);
      }
      stages.domain = &*domain;
    }

    ScoreOptions opts;
    opts.workers = worker_count();
    opts.block_size = a.block;
    opts.malformed = a.strict ? MalformedPolicy::abort : MalformedPolicy::skip;
    opts.nfc = a.nfc;
    const auto stats = score_corpus(a.in, a.out, stages, opts);
    if (accept_ext) accept_ext->shutdown();
    if (lm_ext) lm_ext->shutdown();
    if (!stats.skipped_lines.empty()) {
      io_.err << "warning: skipped " << stats.skipped_lines.size() << " malformed line(s) in " << a.in
              << " (first at line " << stats.skipped_lines.front() + 1 << ")\n";
    }
    io_.out << "scored " << stats.records << " records -> " << a.out << "\n";
    finish({a.out, NormalizationStats::sidecar_path(a.out)});
  }

  // --- select -------------------------------------------------------------
  struct {
    std::string in, out, side = "target", scheme = "whitespace", align_scores, combine = "product";
    std::optional<std::uint64_t> budget;
    std::optional<double> top_percent;
    bool bitext_only = false;
  } select_;

  void add_select() {
    auto* s = add("select", "Select the best pairs of a scored TSV", [this] { run_select(); });
    s->add_option("--in", select_.in, "Scored TSV from the score subcommand")->required();
    s->add_option("--out", select_.out, "Selected records, in input order")->required();
    auto* b = s->add_option("--budget-words", select_.budget, "Word budget counted on --side");
    auto* p = s->add_option("--top-percent", select_.top_percent, "Keep the top N percent of records");
    b->excludes(p);
    s->add_option("--side", select_.side, "source | target")->capture_default_str();
    s->add_option("--scheme", select_.scheme, "Word counting scheme")->capture_default_str();
    s->add_option("--align-scores", select_.align_scores,
                  "align-score output; ranks by alignment and domain instead of the final score");
    s->add_option("--combine", select_.combine, "product | sequential (with --align-scores)")->capture_default_str();
    s->add_flag("--bitext-only", select_.bitext_only, "Write only the source and target columns");
  }

  void run_select() {
    auto& a = select_;
    if (!a.budget && !a.top_percent) throw ConfigError("select needs --budget-words or --top-percent");
    if (a.top_percent && !(*a.top_percent > 0.0 && *a.top_percent <= 100.0)) {
      throw ConfigError("--top-percent must be in (0, 100], got " + CLI::detail::to_string(*a.top_percent));
    }
    if (a.budget && *a.budget == 0) throw ConfigError("--budget-words must be > 0");
    const Side side = parse_side(a.side);
    const Scheme scheme = parse_scheme(a.scheme);
    const MiningRule rule = parse_mining_rule(a.combine);
    if (!a.align_scores.empty() && !a.budget) throw ConfigError("--align-scores needs --budget-words");

    manifest_.add_input(a.in);
    const auto scored = read_scored(a.in);
    std::vector<std::uint64_t> words(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) words[i] = scored.words(i, side, scheme);

    Selection sel;
    std::vector<std::string> warnings;
    if (!a.align_scores.empty()) {
      manifest_.add_input(a.align_scores);
      const auto lines = read_lines(a.align_scores);
      if (lines.size() != scored.size()) {
        throw DataError("'" + a.align_scores + "' has " + std::to_string(lines.size()) + " records, '" + a.in +
                        "' has " + std::to_string(scored.size()));
      }
      std::vector<double> align(lines.size());
      for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cols = split_tabs(lines[i]);
        align[i] = parse_double(cols.back(), a.align_scores + ":" + std::to_string(i + 1) + " alignment score");
      }
      sel = mine_unsupervised_positives(scored.ids, align, scored.column("domain"), words, *a.budget, rule, &warnings);
    } else if (a.budget) {
      sel = select_by_budget(scored.column("final"), scored.ids, words, *a.budget);
      if (sel.budget_exceeds_corpus) warnings.push_back("word budget exceeds the corpus; selecting every record");
    } else {
      sel = select_top_percent(scored.column("final"), scored.ids, *a.top_percent);
      for (auto i : sel.indices) sel.words += words[i];
    }
    for (const auto& w : warnings) io_.err << "warning: " << w << "\n";
    write_selection(a.out, scored.lines, sel.indices, a.bitext_only);
    io_.out << "selected " << sel.indices.size() << " of " << scored.size() << " records, " << sel.words
            << " words -> " << a.out << "\n";
    finish({a.out});
  }

  // --- eval-pr ------------------------------------------------------------
  struct {
    std::string scored, labels, grid = "0:1:0.05", out, column = "final";
  } eval_;

  void add_eval_pr() {
    auto* s = add("eval-pr", "Precision/recall curve of a score column against labels", [this] {
      auto& a = eval_;
      const auto grid = parse_grid(a.grid);
      manifest_.add_input(a.scored);
      manifest_.add_input(a.labels);
      const auto scored = read_scored(a.scored);
      const auto scores = scored.column(a.column);
      const auto labels = read_labels_for(a.labels, scored.ids);
      std::string out = "threshold\tprecision\trecall\tpredicted\ttrue_positive\n";
      for (const auto& p : pr_curve(scores, labels, grid)) {
        out += format_score(p.threshold) + "\t" + format_score(p.precision) + "\t" + format_score(p.recall) + "\t" +
               std::to_string(p.predicted) + "\t" + std::to_string(p.true_positive) + "\n";
      }
      write_file(a.out, out);
      if (std::find(labels.begin(), labels.end(), 0) != labels.end()) {
        io_.out << "auc\t" << format_score(roc_auc(scores, labels)) << "\n";
      }
      finish({a.out});
    });
    s->add_option("--scored", eval_.scored, "Scored TSV")->required();
    s->add_option("--labels", eval_.labels, "Labels TSV: id<TAB>{0|1}")->required();
    s->add_option("--grid", eval_.grid, "Thresholds start:end:step")->capture_default_str();
    s->add_option("--column", eval_.column, "final | lang | accept | domain")->capture_default_str();
    s->add_option("--out", eval_.out, "Curve TSV")->required();
  }

  // --- stats --------------------------------------------------------------
  struct {
    std::string scored, selected, out, side = "target", scheme = "whitespace";
  } stats_;

  void add_stats() {
    auto* s = add("stats", "Histogram and zeroed-fraction report of a scored TSV", [this] {
      auto& a = stats_;
      const Side side = parse_side(a.side);
      const Scheme scheme = parse_scheme(a.scheme);
      manifest_.add_input(a.scored);
      const auto scored = read_scored(a.scored);
      std::vector<std::uint64_t> words(scored.size());
      for (std::size_t i = 0; i < scored.size(); ++i) words[i] = scored.words(i, side, scheme);
      std::uint64_t selected = 0;
      if (!a.selected.empty()) {
        manifest_.add_input(a.selected);
        for (const auto& line : read_lines(a.selected)) {
          const auto cols = split_tabs(line);
          if (cols.size() < 2) throw DataError("'" + a.selected + "' is not a bitext TSV");
          selected += tokenize(cols[side == Side::source ? 0 : 1], scheme).size();
        }
      }
      const auto report = corpus_stats(scored.scores, words, selected);
      write_file(a.out, report.to_json().dump(2) + "\n");
      for (std::size_t f = 0; f < 3; ++f) {
        io_.out << "zeroed by " << kFilterNames[f] << " filter: " << format_score(100.0 * report.zeroed_fraction(f))
                << "%\n";
      }
      finish({a.out});
    });
    s->add_option("--scored", stats_.scored, "Scored TSV")->required();
    s->add_option("--selected", stats_.selected, "Selected subset, for the selected word count");
    s->add_option("--side", stats_.side)->capture_default_str();
    s->add_option("--scheme", stats_.scheme)->capture_default_str();
    s->add_option("--out", stats_.out, "Report JSON")->required();
  }

  Streams io_;
  CLI::App app_;
  std::vector<std::pair<CLI::App*, std::function<void()>>> actions_;
  RunManifest manifest_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Tool tool({out, err});
  return tool.run(argc, argv);
}

}  // namespace sieve::cli
