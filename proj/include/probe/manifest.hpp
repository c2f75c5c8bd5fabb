#ifndef PROBE_MANIFEST_HPP
#define PROBE_MANIFEST_HPP

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "probe/error.hpp"
#include "probe/io.hpp"

namespace probe {

inline constexpr const char* kToolVersion = "0.1.0";

namespace hash {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw IoError("sha256 init failed");
  }

  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw IoError("sha256 update failed");
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw IoError("sha256 final failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

}  // namespace hash

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::vector<std::string> command_line;
  std::string working_dir;
  Json config = Json::object();
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::optional<std::uint64_t> seed;
  std::string started_at;
  std::string finished_at;
  std::string tool_version = kToolVersion;

  void add_input(const std::filesystem::path& p) {
    inputs.push_back({std::filesystem::absolute(p).lexically_normal().string(),
                      hash::sha256_file(p)});
  }
  void add_output(const std::filesystem::path& p) {
    outputs.push_back({std::filesystem::absolute(p).lexically_normal().string(),
                       hash::sha256_file(p)});
  }
};

inline std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

inline Json digests_json(const std::vector<FileDigest>& files) {
  Json a = Json::array();
  for (const auto& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return a;
}

inline Json to_json(const RunManifest& m) {
  Json j;
  j["tool_version"] = m.tool_version;
  j["command_line"] = m.command_line;
  j["working_dir"] = m.working_dir;
  j["config"] = m.config;
  j["seed"] = m.seed ? Json(*m.seed) : Json(nullptr);
  j["inputs"] = digests_json(m.inputs);
  j["outputs"] = digests_json(m.outputs);
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  return j;
}

inline RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command_line = j.at("command_line").get<std::vector<std::string>>();
    m.working_dir = j.value("working_dir", std::string());
    m.config = j.value("config", Json::object());
    if (!j.at("seed").is_null()) m.seed = j["seed"].get<std::uint64_t>();
    for (const auto& f : j.at("inputs"))
      m.inputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
    for (const auto& f : j.at("outputs"))
      m.outputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
    m.started_at = j.value("started_at", std::string());
    m.finished_at = j.value("finished_at", std::string());
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
  return m;
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(Json::parse(io::read_file(path)));
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Writes one sidecar per output, each listing the whole run.
inline void write_manifests(const RunManifest& m) {
  const auto body = to_json(m).dump(2) + "\n";
  for (const auto& out : m.outputs) io::write_file_atomic(manifest_path_for(out.path), body);
}

struct VerifyIssue {
  std::string path;
  std::string problem;  // "missing" or "hash mismatch"
};

/// Re-hashes every input and output listed in a manifest.
inline std::vector<VerifyIssue> verify_hashes(const RunManifest& m) {
  std::vector<VerifyIssue> issues;
  auto check = [&](const FileDigest& f) {
    if (!std::filesystem::exists(f.path)) {
      issues.push_back({f.path, "missing"});
      return;
    }
    if (hash::sha256_file(f.path) != f.sha256) issues.push_back({f.path, "hash mismatch"});
  };
  for (const auto& f : m.inputs) check(f);
  for (const auto& f : m.outputs) check(f);
  return issues;
}

}  // namespace probe

#endif  // PROBE_MANIFEST_HPP
