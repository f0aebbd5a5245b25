#pragma once

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <string>

#include "bitext_sieve/core.hpp"

namespace sieve {

// NFC via ICU. Only applied when requested on the command line.
inline std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (norm->isNormalized(src, status) && U_SUCCESS(status)) return std::string(text);
  status = U_ZERO_ERROR;
  const icu::UnicodeString out = norm->normalize(src, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string s;
  out.toUTF8String(s);
  return s;
}

inline void nfc_in_place(SentencePair& p) {
  p.source = nfc(p.source);
  p.target = nfc(p.target);
}

}  // namespace sieve
