#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recloop/config.hpp"
#include "recloop/errors.hpp"

namespace recloop {

inline constexpr const char* kToolVersion = "recloop 0.1.0";

/// FNV-1a over a byte string; used to fingerprint input files.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct InputDigest {
  std::string path;
  std::string fnv1a;  // hex
};

/// Everything needed to reproduce a run bit-for-bit on the same platform:
/// the effective config snapshot, the master seed and derived per-run seeds,
/// and fingerprints of every input file.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> run_seeds;
  std::string config_snapshot;  // canonical key = value text
  std::vector<InputDigest> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
};

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline InputDigest digest_file(const std::string& path) {
  return {path, hex64(fnv1a64(read_file(path)))};
}

inline std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["master_seed"] = m.master_seed;
  j["run_seeds"] = m.run_seeds;
  j["config_snapshot"] = m.config_snapshot;
  j["inputs"] = nlohmann::json::array();
  for (const auto& in : m.inputs) {
    j["inputs"].push_back({{"path", in.path}, {"fnv1a64", in.fnv1a}});
  }
  j["outputs"] = m.outputs;
  j["duration_seconds"] = m.duration_seconds;
  return j.dump(2) + "\n";
}

inline RunManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
  m.config_snapshot = j.at("config_snapshot").get<std::string>();
  for (const auto& in : j.at("inputs")) {
    m.inputs.push_back({in.at("path").get<std::string>(),
                        in.at("fnv1a64").get<std::string>()});
  }
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.duration_seconds = j.at("duration_seconds").get<double>();
  return m;
}

}  // namespace recloop
