#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "agrostress/error.hpp"

namespace agrostress {

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::io, "sha256 computation failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_bytes(p)); }

// manifest.json in a run directory: one entry per artifact with its path
// relative to the run directory, the producing command and a content hash.
// Entries are kept sorted by path and carry no timestamps, so identical runs
// give identical manifests.
class Manifest {
 public:
  struct Entry {
    std::string path;
    std::string command;
    std::string sha256;
  };

  Manifest(std::filesystem::path run_dir, std::string config_hash, std::uint64_t seed)
      : dir_(std::move(run_dir)), config_hash_(std::move(config_hash)), seed_(seed) {
    const auto file = dir_ / "manifest.json";
    if (!std::filesystem::exists(file)) return;
    try {
      const auto j = nlohmann::json::parse(read_bytes(file));
      for (const auto& e : j.at("artifacts"))
        entries_.push_back({e.at("path").get<std::string>(), e.at("command").get<std::string>(),
                            e.at("sha256").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::io, "corrupt manifest '" + file.string() + "': " + e.what());
    }
  }

  void record(const std::filesystem::path& file, const std::string& command) {
    const auto rel = std::filesystem::relative(file, dir_).generic_string();
    Entry e{rel, command, sha256_file(file)};
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& x) { return x.path == rel; });
    if (it != entries_.end())
      *it = e;
    else
      entries_.push_back(e);
  }

  const std::vector<Entry>& entries() const { return entries_; }

  void save() {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
    nlohmann::json j;
    j["tool"] = "agrostress";
    j["version"] = kToolVersion;
    j["config_hash"] = config_hash_;
    j["seed"] = seed_;
    j["artifacts"] = nlohmann::json::array();
    for (const auto& e : entries_) j["artifacts"].push_back({{"path", e.path}, {"command", e.command}, {"sha256", e.sha256}});
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "cannot write manifest in '" + dir_.string() + "'");
  }

 private:
  std::filesystem::path dir_;
  std::string config_hash_;
  std::uint64_t seed_;
  std::vector<Entry> entries_;
};

}  // namespace agrostress
