#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small parse/format helpers shared by config files, CSV and checkpoints.
namespace periodnet::text {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

std::size_t parse_size(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
double parse_double(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);
std::vector<std::size_t> parse_size_list(std::string_view s, std::string_view what);

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);
std::string join_sizes(const std::vector<std::size_t>& values);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace periodnet::text
