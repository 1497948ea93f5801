#pragma once

// Line-oriented parsing helpers shared by the text formats.

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "xlanchor/error.hpp"
#include "xlanchor/matrix.hpp"

namespace xlanchor::detail {

class LineReader {
 public:
  LineReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') fail("CR line ending (files must use LF)");
    return true;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw_error(ErrorKind::format, name_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

  std::size_t line_no() const noexcept { return line_no_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::istream& in_;
  std::string name_;
  std::size_t line_no_ = 0;
};

// Splits on every occurrence of `sep`; empty fields are kept.
inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool parse_u64(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// Parses a decimal value as a 32-bit float (correctly rounded) and widens it.
// Non-finite values are rejected.
inline bool parse_value(std::string_view s, double& out) {
  if (s.empty()) return false;
  float f = 0.0f;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), f);
  if (ec != std::errc() || p != s.data() + s.size()) return false;
  if (!(f - f == 0.0f)) return false;
  out = static_cast<double>(f);
  return true;
}

// Full-precision double parse, used by model files.
inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && out - out == 0.0;
}

// Space-separated list of exactly `expected` values.
inline Vector parse_vector(const LineReader& rd, std::string_view field, std::size_t expected, const char* what) {
  const auto parts = split(field, ' ');
  if (parts.size() != expected)
    rd.fail(std::string(what) + ": expected " + std::to_string(expected) + " values, found " +
            std::to_string(parts.size()));
  Vector v(expected);
  for (std::size_t i = 0; i < expected; ++i)
    if (!parse_value(parts[i], v[i])) rd.fail(std::string(what) + ": bad number '" + std::string(parts[i]) + "'");
  return v;
}

inline bool has_whitespace(std::string_view s) {
  return s.find_first_of(" \t\n\r\v\f") != std::string_view::npos;
}

// Shortest text that parses back to the same double (model files, reports).
std::string format_double(double v);

}  // namespace xlanchor::detail
