#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sevnet::text {

/// Shortest round-trip decimal form, '.' separator, independent of locale.
std::string format_double(double v);
/// Fixed-precision form for human-facing tables.
std::string format_fixed(double v, int precision);

/// Strict locale-independent number parse; the whole trimmed field must be consumed.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// 16 lowercase hex digits.
std::string format_hex(std::uint64_t v);
std::optional<std::uint64_t> parse_hex(std::string_view s);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char sep);

}  // namespace sevnet::text
