#pragma once

// Two-pass scoring driver. Pass 1 computes the language, acceptability and
// clipped domain partials for every record and the corpus min/max of each.
// Pass 2 re-reads the input and writes the input columns followed by the
// four score columns: lang, accept, domain (clipped, unnormalized), final.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bitext_sieve/acceptability.hpp"
#include "bitext_sieve/core.hpp"
#include "bitext_sieve/domain_filter.hpp"
#include "bitext_sieve/langid.hpp"
#include "bitext_sieve/manifest.hpp"
#include "bitext_sieve/parallel.hpp"
#include "bitext_sieve/selection.hpp"
#include "bitext_sieve/unicode.hpp"

namespace sieve {

// Disabled stages contribute a partial of 1.
struct ScoringStages {
  const LangIdModel* langid = nullptr;
  std::string want_source = "en";
  std::string want_target = "de";
  const AcceptabilityScorer* acceptability = nullptr;
  const DomainFilter* domain = nullptr;
};

struct ScoreOptions {
  std::size_t workers = 1;
  std::size_t block_size = 4096;
  MalformedPolicy malformed = MalformedPolicy::skip;
  bool nfc = false;
};

inline constexpr std::array<const char*, 3> kFilterNames{"language", "acceptability", "domain"};
inline constexpr std::size_t kScoreColumns = 4;

struct NormalizationStats {
  std::string corpus;
  std::string sha256;
  std::uint64_t records = 0;
  std::vector<std::uint64_t> skipped_lines;  // 0-based input line ordinals
  std::array<bool, 3> enabled{};
  std::array<MinMax, 3> ranges{};

  double normalized_domain(double d) const { return ranges[2].normalize(d); }

  double final_score(const ScoreVector& s) const {
    return combine(s.language, s.acceptability, normalized_domain(s.domain));
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus;
    j["sha256"] = sha256;
    j["records"] = records;
    j["skipped"] = skipped_lines.size();
    j["skipped_lines"] = skipped_lines;
    nlohmann::ordered_json f;
    for (std::size_t k = 0; k < 3; ++k) {
      nlohmann::ordered_json e;
      e["enabled"] = enabled[k];
      e["normalized"] = k == 2;
      if (ranges[k].count) {
        e["min"] = ranges[k].min;
        e["max"] = ranges[k].max;
      } else {
        e["min"] = nullptr;
        e["max"] = nullptr;
      }
      f[kFilterNames[k]] = e;
    }
    j["filters"] = f;
    return j;
  }

  static NormalizationStats from_json(const nlohmann::json& j) {
    NormalizationStats s;
    try {
      s.corpus = j.at("corpus").get<std::string>();
      s.sha256 = j.at("sha256").get<std::string>();
      s.records = j.at("records").get<std::uint64_t>();
      s.skipped_lines = j.at("skipped_lines").get<std::vector<std::uint64_t>>();
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& e = j.at("filters").at(kFilterNames[k]);
        s.enabled[k] = e.at("enabled").get<bool>();
        if (!e.at("min").is_null()) {
          s.ranges[k].min = e.at("min").get<double>();
          s.ranges[k].max = e.at("max").get<double>();
          s.ranges[k].count = s.records;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed stats sidecar: ") + e.what());
    }
    return s;
  }

  static std::string sidecar_path(const std::string& scored) { return scored + ".stats.json"; }

  static std::optional<NormalizationStats> load_for(const std::string& scored) {
    const auto path = sidecar_path(scored);
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("cannot parse '" + path + "': " + e.what());
    }
  }
};

namespace pipeline_detail {

// Rounds to the precision of the written columns, so that `final` can be
// recomputed from the file and a scorer echoing the written values
// reproduces the run exactly.
inline double quantize(double v) { return parse_double(format_score(v), "score"); }

inline void score_block(std::span<const SentencePair> block, const ScoringStages& stages, std::size_t workers,
                        std::vector<ScoreVector>& out) {
  std::vector<ScoreVector> s(block.size());
  if (stages.langid) {
    parallel_for(block.size(), workers, [&](std::size_t i) {
      s[i].language = language_filter_score(*stages.langid, block[i], stages.want_source, stages.want_target);
    });
  }
  if (stages.acceptability) {
    const auto a = stages.acceptability->score_batch(block, workers);
    for (std::size_t i = 0; i < block.size(); ++i) s[i].acceptability = a[i];
  }
  if (stages.domain) {
    std::vector<double> d;
    if (stages.domain->external()) {
      d = stages.domain->score_batch(block);
    } else {
      d.resize(block.size());
      const std::size_t chunks = std::max<std::size_t>(1, std::min(workers, block.size()));
      parallel_for(chunks, chunks, [&](std::size_t c) {
        const std::size_t a = block.size() * c / chunks, b = block.size() * (c + 1) / chunks;
        const auto part = stages.domain->score_batch(block.subspan(a, b - a));
        std::copy(part.begin(), part.end(), d.begin() + static_cast<long>(a));
      });
    }
    for (std::size_t i = 0; i < block.size(); ++i) s[i].domain = d[i];
  }
  for (auto& v : s) {
    v.acceptability = quantize(v.acceptability);
    v.domain = quantize(v.domain);
  }
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace pipeline_detail

inline void append_scores(std::string& line, const ScoreVector& s) {
  for (double v : {s.language, s.acceptability, s.domain, s.final}) {
    line.push_back('\t');
    line += format_score(v);
  }
}

// Scores `in_path` into `out_path` and writes the stats sidecar next to it.
inline NormalizationStats score_corpus(const std::string& in_path, const std::string& out_path,
                                       const ScoringStages& stages, const ScoreOptions& opts = {}) {
  NormalizationStats stats;
  stats.corpus = in_path;
  stats.sha256 = sha256_file(in_path);
  stats.enabled = {stages.langid != nullptr, stages.acceptability != nullptr, stages.domain != nullptr};

  std::vector<ScoreVector> partials;
  {
    BitextReader reader(in_path, opts.malformed);
    std::vector<SentencePair> block;
    block.reserve(opts.block_size);
    auto flush = [&] {
      pipeline_detail::score_block(block, stages, opts.workers, partials);
      block.clear();
    };
    while (auto p = reader.next()) {
      if (opts.nfc) nfc_in_place(*p);
      block.push_back(std::move(*p));
      if (block.size() == opts.block_size) flush();
    }
    if (!block.empty()) flush();
    for (const auto& d : reader.diagnostics()) stats.skipped_lines.push_back(d.line);
  }
  stats.records = partials.size();
  for (const auto& s : partials) {
    stats.ranges[0].add(s.language);
    stats.ranges[1].add(s.acceptability);
    stats.ranges[2].add(s.domain);
  }

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open output file '" + out_path + "'");
  BitextReader reader(in_path, MalformedPolicy::skip);
  std::string buf;
  std::size_t k = 0;
  while (auto p = reader.next()) {
    if (k >= partials.size()) throw DataError("input '" + in_path + "' changed while scoring");
    if (opts.nfc) nfc_in_place(*p);
    ScoreVector s = partials[k++];
    s.final = stats.final_score(s);
    write_bitext_line(buf, *p);
    append_scores(buf, s);
    buf.push_back('\n');
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  out.close();
  if (!out) throw DataError("write failed for '" + out_path + "'");
  if (k != partials.size()) throw DataError("input '" + in_path + "' changed while scoring");

  write_file(NormalizationStats::sidecar_path(out_path), stats.to_json().dump(2) + "\n");
  return stats;
}

// A scored TSV read back for selection and evaluation. Ids are recovered from
// the sidecar's skipped-line list when it is present.
struct ScoredCorpus {
  std::vector<std::string> lines;
  std::vector<std::uint64_t> ids;
  std::vector<ScoreVector> scores;

  std::size_t size() const { return lines.size(); }

  std::uint64_t words(std::size_t i, Side side, Scheme scheme) const {
    const auto cols = split_tabs(lines[i]);
    return tokenize(cols[side == Side::source ? 0 : 1], scheme).size();
  }

  std::vector<double> column(std::string_view name) const {
    std::vector<double> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
      if (name == "final") out.push_back(s.final);
      else if (name == "lang" || name == "language") out.push_back(s.language);
      else if (name == "accept" || name == "acceptability") out.push_back(s.acceptability);
      else if (name == "domain") out.push_back(s.domain);
      else throw ConfigError("unknown --column '" + std::string(name) + "' (expected final|lang|accept|domain)");
    }
    return out;
  }
};

inline ScoredCorpus read_scored(const std::string& path) {
  ScoredCorpus c;
  c.lines = read_lines(path);
  const auto stats = NormalizationStats::load_for(path);
  std::size_t skip_at = 0;
  std::uint64_t ordinal = 0;
  for (std::size_t i = 0; i < c.lines.size(); ++i, ++ordinal) {
    if (stats) {
      while (skip_at < stats->skipped_lines.size() && stats->skipped_lines[skip_at] == ordinal) {
        ++skip_at;
        ++ordinal;
      }
    }
    const auto cols = split_tabs(c.lines[i]);
    if (cols.size() < 2 + kScoreColumns) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": expected source, target and 4 score columns");
    }
    const auto n = cols.size();
    const std::string where = path + ":" + std::to_string(i + 1);
    c.scores.push_back({parse_double(cols[n - 4], where + " lang"), parse_double(cols[n - 3], where + " accept"),
                        parse_double(cols[n - 2], where + " domain"), parse_double(cols[n - 1], where + " final")});
    c.ids.push_back(ordinal);
  }
  if (stats && stats->records != c.lines.size()) {
    throw DataError("'" + path + "' has " + std::to_string(c.lines.size()) + " records but its sidecar says " +
                    std::to_string(stats->records));
  }
  return c;
}

// Writes the selected lines in input order.
inline void write_selection(const std::string& path, const std::vector<std::string>& lines,
                            std::vector<std::size_t> indices, bool bitext_only) {
  std::sort(indices.begin(), indices.end());
  std::string out;
  for (auto i : indices) {
    if (bitext_only) {
      const auto cols = split_tabs(lines[i]);
      out.append(cols[0]).append("\t").append(cols[1]);
    } else {
      out += lines[i];
    }
    out.push_back('\n');
  }
  write_file(path, out);
}

// Labels TSV: id<TAB>{0|1}. Returns labels aligned with `ids`.
inline std::vector<int> read_labels_for(const std::string& path, std::span<const std::uint64_t> ids) {
  std::unordered_map<std::uint64_t, int> by_id;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    const std::string where = path + ":" + std::to_string(n);
    if (cols.size() != 2) throw DataError(where + ": expected id<TAB>label");
    const double id = parse_double(cols[0], where + " id");
    const double label = parse_double(cols[1], where + " label");
    if (id < 0 || id != std::floor(id) || (label != 0.0 && label != 1.0)) throw DataError(where + ": bad id or label");
    by_id[static_cast<std::uint64_t>(id)] = static_cast<int>(label);
  }
  std::vector<int> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("labels file '" + path + "' has no entry for id " + std::to_string(id));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace sieve
