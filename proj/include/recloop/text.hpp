#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "recloop/errors.hpp"

namespace recloop {

/// Shortest round-trip decimal form of a double. Keeps every serialized
/// number byte-stable across reruns.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, std::size_t line = 0) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("expected a number, got '" + std::string(text) + "'",
                     line);
  }
  return v;
}

inline std::int64_t parse_int(std::string_view text, std::size_t line = 0) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("expected an integer, got '" + std::string(text) + "'",
                     line);
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view text, std::size_t line = 0) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(
        "expected a non-negative integer, got '" + std::string(text) + "'",
        line);
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view text,
                                           std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = text.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(text.substr(pos));
      return out;
    }
    out.push_back(text.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace recloop
