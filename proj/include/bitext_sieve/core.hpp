#pragma once

// Shared domain types, tokenization, bitext TSV I/O and word counting.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sieve {

// Error taxonomy. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct IngestError : DataError {
  IngestError(const std::string& what, std::size_t offset)
      : DataError(what + " at byte offset " + std::to_string(offset)), byte_offset(offset) {}
  std::size_t byte_offset;
};
struct ProtocolError : Error {
  using Error::Error;
};

enum class Side { source, target };
enum class Scheme { whitespace, character };

inline Side parse_side(std::string_view s) {
  if (s == "source") return Side::source;
  if (s == "target") return Side::target;
  throw ConfigError("unknown side '" + std::string(s) + "' (expected source|target)");
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "whitespace") return Scheme::whitespace;
  if (s == "character") return Scheme::character;
  throw ConfigError("unknown tokenization scheme '" + std::string(s) + "'");
}

inline const char* to_string(Scheme s) { return s == Scheme::whitespace ? "whitespace" : "character"; }
inline const char* to_string(Side s) { return s == Side::source ? "source" : "target"; }

struct SentencePair {
  std::uint64_t id = 0;
  std::string source;
  std::string target;
  std::optional<std::string> meta;

  const std::string& side(Side s) const { return s == Side::source ? source : target; }
  std::string& side(Side s) { return s == Side::source ? source : target; }

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct TokenSeq {
  std::vector<std::string> tokens;
  Scheme scheme = Scheme::whitespace;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  // Inverse of tokenize modulo collapsed whitespace.
  std::string join() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0 && scheme == Scheme::whitespace) out.push_back(' ');
      out += tokens[i];
    }
    return out;
  }

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

// Per-filter partial scores. `domain` is the clipped value before corpus
// normalization; `final` is the product of normalized partials.
struct ScoreVector {
  double language = 1.0;
  double acceptability = 1.0;
  double domain = 1.0;
  double final = 1.0;
};

namespace utf8 {

// Decodes one scalar value starting at `pos`. Returns the scalar and advances
// `pos`; throws IngestError on malformed input (overlongs, surrogates, > U+10FFFF).
inline char32_t decode(std::string_view s, std::size_t& pos, std::size_t base_offset = 0) {
  const auto fail = [&](std::size_t at) -> char32_t {
    throw IngestError("invalid UTF-8", base_offset + at);
  };
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return fail(pos);
  }
  if (pos + len > s.size()) return fail(pos);
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return fail(pos + i);
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return fail(pos);
  pos += len;
  return cp;
}

inline void validate(std::string_view s, std::size_t base_offset = 0) {
  for (std::size_t pos = 0; pos < s.size();) decode(s, pos, base_offset);
}

inline std::vector<char32_t> codepoints(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) out.push_back(decode(s, pos));
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// White_Space property (Unicode 15).
inline bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

}  // namespace utf8

inline TokenSeq tokenize(std::string_view text, Scheme scheme) {
  TokenSeq seq;
  seq.scheme = scheme;
  std::string current;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t start = pos;
    const char32_t cp = utf8::decode(text, pos);
    if (utf8::is_space(cp)) {
      if (!current.empty()) seq.tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (scheme == Scheme::character) {
      seq.tokens.emplace_back(text.substr(start, pos - start));
    } else {
      current.append(text.substr(start, pos - start));
    }
  }
  if (!current.empty()) seq.tokens.push_back(std::move(current));
  return seq;
}

// Non-whitespace scalar count.
inline std::size_t char_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < text.size();) n += utf8::is_space(utf8::decode(text, pos)) ? 0 : 1;
  return n;
}

// Fixed 6-fractional-digit rendering used by every scored output column.
inline std::string format_score(double v) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf, static_cast<std::size_t>(n));
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw DataError("cannot parse " + std::string(what) + " '" + std::string(s) + "' as a number");
  }
  return v;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

enum class MalformedPolicy { skip, abort };

struct Diagnostic {
  std::uint64_t line = 0;
  std::string message;
};

// Parses one TSV line into a pair. Everything after the second tab is the
// opaque meta column.
inline std::optional<SentencePair> parse_bitext_line(std::string_view line, std::uint64_t id,
                                                     std::size_t line_offset, std::string* why) {
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) {
    if (why) *why = "expected at least 2 tab-separated columns, found 1";
    return std::nullopt;
  }
  const auto tab2 = line.find('\t', tab + 1);
  SentencePair p;
  p.id = id;
  p.source = std::string(line.substr(0, tab));
  if (tab2 == std::string_view::npos) {
    p.target = std::string(line.substr(tab + 1));
  } else {
    p.target = std::string(line.substr(tab + 1, tab2 - tab - 1));
    p.meta = std::string(line.substr(tab2 + 1));
  }
  try {
    utf8::validate(line, line_offset);
  } catch (const IngestError& e) {
    if (why) *why = e.what();
    return std::nullopt;
  }
  return p;
}

inline void write_bitext_line(std::string& out, const SentencePair& p) {
  out += p.source;
  out.push_back('\t');
  out += p.target;
  if (p.meta) {
    out.push_back('\t');
    out += *p.meta;
  }
}

// Streaming reader over a UTF-8 bitext TSV file. Ids follow the input line
// ordinal (skipped lines still consume an ordinal).
class BitextReader {
 public:
  struct Range {
    std::uint64_t begin = 0;  // byte offset, at a line start
    std::uint64_t end = 0;    // byte offset, exclusive
    std::uint64_t first_id = 0;
  };

  explicit BitextReader(const std::string& path, MalformedPolicy policy = MalformedPolicy::skip)
      : BitextReader(path, policy, std::nullopt) {}

  BitextReader(const std::string& path, MalformedPolicy policy, std::optional<Range> range)
      : path_(path), in_(path, std::ios::binary), policy_(policy) {
    if (!in_) throw DataError("cannot open input file '" + path + "'");
    if (range) {
      in_.seekg(static_cast<std::streamoff>(range->begin));
      offset_ = range->begin;
      end_ = range->end;
      next_id_ = range->first_id;
    }
  }

  std::optional<SentencePair> next() {
    std::string line;
    while (offset_ < end_ && std::getline(in_, line)) {
      const std::uint64_t id = next_id_++;
      const std::size_t line_offset = offset_;
      offset_ += line.size() + 1;
      std::string why;
      if (auto p = parse_bitext_line(line, id, line_offset, &why)) return p;
      if (policy_ == MalformedPolicy::abort) {
        throw DataError(path_ + ":" + std::to_string(id + 1) + ": " + why);
      }
      diagnostics_.push_back({id, why});
    }
    return std::nullopt;
  }

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::string path_;
  std::ifstream in_;
  MalformedPolicy policy_;
  std::uint64_t offset_ = 0;
  std::uint64_t end_ = UINT64_MAX;
  std::uint64_t next_id_ = 0;
  std::vector<Diagnostic> diagnostics_;
};

// Splits a file into at most `shards` byte ranges that start on line
// boundaries, each tagged with the ordinal of its first line.
inline std::vector<BitextReader::Range> plan_shards(const std::string& path, std::size_t shards) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  std::vector<std::uint64_t> line_starts{0};
  std::string line;
  std::uint64_t off = 0;
  while (std::getline(in, line)) {
    off += line.size() + 1;
    line_starts.push_back(off);
  }
  const std::uint64_t lines = line_starts.size() - 1;
  std::vector<BitextReader::Range> out;
  if (shards == 0) shards = 1;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::uint64_t a = lines * s / shards;
    const std::uint64_t b = lines * (s + 1) / shards;
    if (a == b) continue;
    out.push_back({line_starts[a], line_starts[b], a});
  }
  return out;
}

inline std::vector<SentencePair> read_bitext(const std::string& path,
                                             MalformedPolicy policy = MalformedPolicy::skip,
                                             std::vector<Diagnostic>* diagnostics = nullptr) {
  BitextReader reader(path, policy);
  std::vector<SentencePair> out;
  while (auto p = reader.next()) out.push_back(std::move(*p));
  if (diagnostics) *diagnostics = reader.diagnostics();
  return out;
}

inline std::size_t count_words(const SentencePair& p, Side side, Scheme scheme) {
  return tokenize(p.side(side), scheme).size();
}

template <typename Range>
std::uint64_t count_words(const Range& corpus, Side side, Scheme scheme) {
  std::uint64_t total = 0;
  for (const SentencePair& p : corpus) total += count_words(p, side, scheme);
  return total;
}

// Reads every line of a plain text file (LF-terminated).
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace sieve
