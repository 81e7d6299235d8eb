#include "periodnet/text.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace periodnet::text {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

namespace {

[[noreturn]] void bad(std::string_view s, std::string_view what, std::string_view expected) {
  throw std::invalid_argument(std::string(what) + ": expected " + std::string(expected) + ", got '" +
                              std::string(s) + "'");
}

}  // namespace

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  auto t = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad(s, what, "a non-negative integer");
  return v;
}

std::size_t parse_size(std::string_view s, std::string_view what) {
  return static_cast<std::size_t>(parse_u64(s, what));
}

double parse_double(std::string_view s, std::string_view what) {
  auto t = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
    bad(s, what, "a finite number");
  }
  return v;
}

bool parse_bool(std::string_view s, std::string_view what) {
  auto t = trim(s);
  if (t == "1" || t == "true" || t == "on" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "off" || t == "no") return false;
  bad(s, what, "a boolean");
}

std::vector<std::size_t> parse_size_list(std::string_view s, std::string_view what) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(parse_size(part, what));
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace periodnet::text
