#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>

#include "recloop/errors.hpp"
#include "recloop/text.hpp"

namespace recloop {

/// Flat `key = value` configuration, one pair per line, `#` comments.
using ConfigMap = std::map<std::string, std::string>;

inline constexpr std::array<std::string_view, 40> kKnownConfigKeys = {
    "ratings",       "groups",        "truth",
    "vocab_out",     "out",           "seed",
    "learning_rate", "latent_dim",    "l2_coeff",
    "epochs",        "iterations",    "runs",
    "policy",        "epsilon",       "rec_len",
    "feedback",      "theta",         "relevance_threshold",
    "retrain",       "seen_update",   "collect_user_detail",
    "sample_users",  "repetitions",   "planted",
    "planted_users", "planted_items", "planted_groups",
    "planted_dim",   "planted_scale", "planted_rated_per_user",
    "synthetic",     "synthetic_users", "synthetic_items",
    "synthetic_groups", "synthetic_rank", "synthetic_noise",
    "synthetic_home_groups", "synthetic_rated_per_user",
    "synthetic_group_decay", "synthetic_home_weight_power",
};

inline bool is_known_config_key(std::string_view key) {
  for (std::string_view k : kKnownConfigKeys) {
    if (k == key) {
      return true;
    }
  }
  return false;
}

inline ConfigMap parse_config(std::istream& in) {
  ConfigMap config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') {
      continue;
    }
    std::size_t eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", line_no);
    }
    std::string key(trim(text.substr(0, eq)));
    std::string value(trim(text.substr(eq + 1)));
    if (key.empty()) {
      throw ParseError("empty key", line_no);
    }
    if (!is_known_config_key(key)) {
      throw ParseError("unknown key '" + key + "'", line_no);
    }
    if (!config.emplace(std::move(key), std::move(value)).second) {
      throw ParseError("duplicate key", line_no);
    }
  }
  return config;
}

/// Canonical form: sorted keys, one `key = value` line each. Re-parsing the
/// result yields an equal map.
inline std::string serialize_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [key, value] : config) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

inline std::string config_string(const ConfigMap& config,
                                 const std::string& key,
                                 const std::string& fallback) {
  auto it = config.find(key);
  return it == config.end() ? fallback : it->second;
}

inline std::string config_required(const ConfigMap& config,
                                   const std::string& key) {
  auto it = config.find(key);
  if (it == config.end()) {
    throw ParseError("missing required config key '" + key + "'");
  }
  return it->second;
}

inline double config_double(const ConfigMap& config, const std::string& key,
                            double fallback) {
  auto it = config.find(key);
  return it == config.end() ? fallback : parse_double(it->second);
}

inline std::uint64_t config_uint(const ConfigMap& config,
                                 const std::string& key,
                                 std::uint64_t fallback) {
  auto it = config.find(key);
  return it == config.end() ? fallback : parse_uint(it->second);
}

inline bool config_bool(const ConfigMap& config, const std::string& key,
                        bool fallback) {
  auto it = config.find(key);
  if (it == config.end()) {
    return fallback;
  }
  if (it->second == "true") {
    return true;
  }
  if (it->second == "false") {
    return false;
  }
  throw ParseError("key '" + key + "' expects true or false, got '" +
                   it->second + "'");
}

}  // namespace recloop
