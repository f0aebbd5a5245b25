#pragma once

// File digests and the run manifest written next to every output.

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bitext_sieve/core.hpp"

namespace sieve {

inline constexpr std::string_view kToolVersion = "0.1.0";

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  }

  void update(std::string_view data) {
    if (EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1) throw Error("SHA-256 update failed");
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 15]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data);
  return h.hex();
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
  std::optional<std::uint64_t> seed;
  std::string timestamp;

  void add_input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }
  void add_output(const std::string& path) { outputs.emplace_back(path, sha256_file(path)); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "bitext-sieve";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["flags"] = flags;
    j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
    auto files = [](const auto& list) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& [path, digest] : list) a.push_back({{"path", path}, {"sha256", digest}});
      return a;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    j["timestamp"] = timestamp;
    return j;
  }

  // Written to <primary output>.manifest.json.
  std::string write(const std::string& primary_output) {
    if (timestamp.empty()) timestamp = utc_timestamp();
    const std::string path = primary_output + ".manifest.json";
    write_file(path, to_json().dump(2) + "\n");
    return path;
  }
};

}  // namespace sieve
